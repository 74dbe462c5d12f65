"""Scenario files.

A scenario is a TOML document with named sections::

    seed = 7
    slots = 100000
    system = "clavis2"

    [source]
    mu = 0.5

    [bob]
    basis_mode = "active"

    [channel.alice_eve]
    loss_db = 0.0

    [attack]
    enabled = true

Extra ``[detector.<name>]`` sections add or override detector presets;
``base = "<preset>"`` inherits from an existing one.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .detector import DetectorError, GateSchedule
from .optics import ChannelParams, OpticsError
from .presets import ConfigError, Presets, SystemPreset, read_toml, parse_toml_text
from .protocol.bb84 import BasisMode

__all__ = ["ConfigError", "Scenario", "set_path", "parse_value"]

_TOP_KEYS = {"seed", "slots", "system", "source", "bob", "gate", "channel", "attack",
             "watchdog", "postprocessing", "detector"}
_SECTION_KEYS = {
    "source": {"mu", "wavelength"},
    "bob": {"detectors", "basis_mode"},
    "gate": {"period", "gate_width"},
    "channel": {"alice_eve", "eve_bob"},
    "channel.alice_eve": {"loss_db", "flip_prob"},
    "channel.eve_bob": {"loss_db", "flip_prob"},
    "attack": {"enabled", "cw_power", "trigger_peak_power", "rate_match", "dark_count_emulation_rate",
               "trigger_duration", "trigger_offset", "bob_prime_efficiency",
               "bob_prime_dark_count_prob", "require_blinding"},
    "watchdog": {"enabled", "threshold_power", "integration_window", "noise_floor"},
    "postprocessing": {"qber_sample_fraction", "qber_abort", "tag_bits", "pa_margin_bits", "block_sizes"},
}


def _section(data: Mapping[str, Any], path: str) -> dict:
    node: Any = data
    for part in path.split("."):
        node = node.get(part, {}) if isinstance(node, Mapping) else None
        if not isinstance(node, Mapping):
            raise ConfigError(f"{path}: expected a table")
    unknown = set(node) - _SECTION_KEYS[path]
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown field")
    return dict(node)


def _get(section: Mapping, key: str, where: str, kind, default, check=None, why=""):
    value = section.get(key, default)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if value is not None and not isinstance(value, kind) or (kind in (int, float) and isinstance(value, bool)):
        raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
    if check is not None and value is not None and not check(value):
        raise ConfigError(f"{where}.{key}: {why}, got {value!r}")
    return value


@dataclass(frozen=True)
class SourceConfig:
    mu: float = 0.1
    wavelength: float = 1550e-9


@dataclass(frozen=True)
class AttackSettings:
    enabled: bool = False
    cw_power: float = 1.08e-3
    trigger_peak_power: float | None = None
    rate_match: bool = False
    dark_count_emulation_rate: float = 0.0
    trigger_duration: float = 2.5
    trigger_offset: float = 2.5
    bob_prime_efficiency: float = 1.0
    bob_prime_dark_count_prob: float = 0.0
    require_blinding: bool = True


@dataclass(frozen=True)
class WatchdogSettings:
    enabled: bool = False
    threshold_power: float = 1e-6
    integration_window: int = 100
    noise_floor: float = 0.0


@dataclass(frozen=True)
class PostProcessingConfig:
    qber_sample_fraction: float = 0.1
    qber_abort: float = 0.11
    tag_bits: int = 64
    pa_margin_bits: int = 64
    block_sizes: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Scenario:
    seed: int
    slots: int
    system: SystemPreset
    source: SourceConfig
    bob_detectors: tuple[str, ...]
    basis_mode: BasisMode
    schedule: GateSchedule
    alice_eve: ChannelParams
    eve_bob: ChannelParams
    attack: AttackSettings
    watchdog: WatchdogSettings
    postprocessing: PostProcessingConfig
    presets: Presets = field(repr=False, compare=False)
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(read_toml(path))

    @classmethod
    def from_text(cls, text: str) -> "Scenario":
        return cls.from_dict(parse_toml_text(text))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        data = copy.deepcopy(dict(data))
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown top-level field")
        presets = Presets.builtin().extended(data)
        system = presets.system(_get(data, "system", "scenario", str, "clavis2"))
        seed = _get(data, "seed", "scenario", int, 0)
        slots = _get(data, "slots", "scenario", int, 10_000, lambda v: v >= 1, "must be >= 1")

        src = _section(data, "source")
        source = SourceConfig(
            mu=_get(src, "mu", "source", float, 0.1, lambda v: v > 0, "must be > 0"),
            wavelength=_get(src, "wavelength", "source", float, 1550e-9, lambda v: v > 0, "must be > 0"),
        )

        bob = _section(data, "bob")
        mode_name = _get(bob, "basis_mode", "bob", str, "active",
                         lambda v: v in ("active", "passive"), "expected 'active' or 'passive'")
        basis_mode = BasisMode(mode_name)
        dets = bob.get("detectors", list(system.detectors))
        if not isinstance(dets, list) or not all(isinstance(d, str) for d in dets):
            raise ConfigError("bob.detectors: expected a list of preset names")
        wanted = 2 if basis_mode is BasisMode.ACTIVE else 4
        if basis_mode is BasisMode.PASSIVE and len(dets) == 2:
            dets = dets * 2
        if len(dets) != wanted:
            raise ConfigError(f"bob.detectors: {mode_name} basis choice needs {wanted} detectors, got {len(dets)}")
        for name in dets:
            if name not in presets.detectors:
                raise ConfigError(f"bob.detectors: unknown preset {name!r}")

        gate = _section(data, "gate")
        try:
            schedule = GateSchedule(
                period=_get(gate, "period", "gate", float, system.gate_period),
                gate_width=_get(gate, "gate_width", "gate", float, system.gate_width),
            )
        except DetectorError as exc:
            raise ConfigError(f"gate: {exc}") from None

        _section(data, "channel")
        channels = []
        for name in ("alice_eve", "eve_bob"):
            sec = _section(data, f"channel.{name}")
            where = f"channel.{name}"
            try:
                channels.append(ChannelParams(
                    loss_db=_get(sec, "loss_db", where, float, 0.0),
                    flip_prob=_get(sec, "flip_prob", where, float, 0.0),
                ))
            except OpticsError as exc:
                raise ConfigError(f"{where}: {exc}") from None

        att = _section(data, "attack")
        trig = att.get("trigger_peak_power", "auto")
        if trig == "auto":
            trig = None
        elif isinstance(trig, bool) or not isinstance(trig, (int, float)) or trig <= 0:
            raise ConfigError(f"attack.trigger_peak_power: expected 'auto' or a positive number, got {trig!r}")
        prob = (lambda v: 0.0 <= v <= 1.0), "must lie in [0, 1]"
        attack = AttackSettings(
            enabled=_get(att, "enabled", "attack", bool, False),
            cw_power=_get(att, "cw_power", "attack", float, system.blinding_power, lambda v: v >= 0, "must be >= 0"),
            trigger_peak_power=None if trig is None else float(trig),
            rate_match=_get(att, "rate_match", "attack", bool, False),
            dark_count_emulation_rate=_get(att, "dark_count_emulation_rate", "attack", float, 0.0, *prob),
            trigger_duration=_get(att, "trigger_duration", "attack", float, system.trigger_duration),
            trigger_offset=_get(att, "trigger_offset", "attack", float, system.trigger_offset),
            bob_prime_efficiency=_get(att, "bob_prime_efficiency", "attack", float, 1.0, *prob),
            bob_prime_dark_count_prob=_get(att, "bob_prime_dark_count_prob", "attack", float, 0.0, *prob),
            require_blinding=_get(att, "require_blinding", "attack", bool, True),
        )

        wd = _section(data, "watchdog")
        watchdog = WatchdogSettings(
            enabled=_get(wd, "enabled", "watchdog", bool, False),
            threshold_power=_get(wd, "threshold_power", "watchdog", float, 1e-6, lambda v: v > 0, "must be > 0"),
            integration_window=_get(wd, "integration_window", "watchdog", int, 100, lambda v: v >= 1, "must be >= 1"),
            noise_floor=_get(wd, "noise_floor", "watchdog", float, 0.0, lambda v: v >= 0, "must be >= 0"),
        )

        pp = _section(data, "postprocessing")
        blocks = pp.get("block_sizes")
        if blocks is not None:
            if not isinstance(blocks, list) or not blocks or not all(isinstance(b, int) and b >= 1 for b in blocks):
                raise ConfigError("postprocessing.block_sizes: expected a list of positive integers")
            blocks = tuple(blocks)
        post = PostProcessingConfig(
            qber_sample_fraction=_get(pp, "qber_sample_fraction", "postprocessing", float, 0.1,
                                      lambda v: 0 < v < 1, "must lie in (0, 1)"),
            qber_abort=_get(pp, "qber_abort", "postprocessing", float, 0.11, lambda v: 0 < v <= 0.5,
                            "must lie in (0, 0.5]"),
            tag_bits=_get(pp, "tag_bits", "postprocessing", int, 64, lambda v: v >= 0, "must be >= 0"),
            pa_margin_bits=_get(pp, "pa_margin_bits", "postprocessing", int, 64, lambda v: v >= 0, "must be >= 0"),
            block_sizes=blocks,
        )

        return cls(
            seed=seed,
            slots=slots,
            system=system,
            source=source,
            bob_detectors=tuple(dets),
            basis_mode=basis_mode,
            schedule=schedule,
            alice_eve=channels[0],
            eve_bob=channels[1],
            attack=attack,
            watchdog=watchdog,
            postprocessing=post,
            presets=presets,
            raw=data,
        )

    def with_value(self, path: str, value: Any) -> "Scenario":
        raw = copy.deepcopy(self.raw)
        set_path(raw, path, value)
        return Scenario.from_dict(raw)


def set_path(data: dict, path: str, value: Any) -> None:
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: {part} is not a table")
    node[parts[-1]] = value


def parse_value(text: str) -> Any:
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text
