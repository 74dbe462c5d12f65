"""Named detector and system presets loaded from TOML."""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .detector import (
    DEFAULT_THERMAL_ONSET,
    ClickThresholds,
    Detector,
    DetectorElectrical,
    DetectorError,
    GateSchedule,
    GeigerParams,
    ThermalParams,
    ThresholdTable,
    calibrate_responsivity,
    thermal_resistance_for_onset,
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


_DETECTOR_KEYS = {
    "r_bias", "p_blind", "p_never", "p_always", "efficiency", "dark_count_prob",
    "v_hv", "v_br", "dc_margin", "gate_amplitude", "threshold_table",
    "thermal", "thermal_onset", "dvbr_per_kelvin", "gate_period", "gate_width", "responsivity",
}
_SYSTEM_KEYS = {
    "detectors", "blinding_power", "gate_period", "gate_width",
    "trigger_duration", "trigger_offset",
}


def parse_toml_text(text: str, source: str = "<string>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def read_toml(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_toml_text(text, str(path))


def _number(section: Mapping[str, Any], key: str, where: str, default=None) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class SystemPreset:
    name: str
    detectors: tuple[str, ...]
    blinding_power: float
    gate_period: float = 200.0
    gate_width: float = 2.5
    trigger_duration: float = 2.5
    trigger_offset: float = 2.5


class Presets:
    """Preset catalogue: the shipped table, optionally extended by user sections."""

    def __init__(self, detectors: dict[str, dict] | None = None, systems: dict[str, dict] | None = None):
        self.detectors: dict[str, dict] = dict(detectors or {})
        self.systems: dict[str, dict] = dict(systems or {})

    @classmethod
    def builtin(cls) -> "Presets":
        text = resources.files("blindqkd").joinpath("data/presets.toml").read_text()
        data = parse_toml_text(text, "presets.toml")
        return cls(data.get("detector", {}), data.get("system", {}))

    def extended(self, data: Mapping[str, Any]) -> "Presets":
        """Copy with ``[detector.*]`` (and, in preset files, ``[system.*]``) sections merged in."""
        detectors = dict(self.detectors)
        for name, section in data.get("detector", {}).items():
            base = detectors.get(section.get("base", name), {})
            merged = {**base, **{k: v for k, v in section.items() if k != "base"}}
            detectors[name] = merged
        systems = dict(self.systems)
        extra = data.get("system", {})
        if isinstance(extra, Mapping):
            for name, section in extra.items():
                systems[name] = {**systems.get(name, {}), **section}
        return Presets(detectors, systems)

    def detector(self, name: str, schedule: GateSchedule | None = None) -> Detector:
        if name not in self.detectors:
            known = ", ".join(sorted(self.detectors))
            raise ConfigError(f"detector.{name}: unknown preset (known: {known})")
        return build_detector(name, self.detectors[name], schedule)

    def system(self, name: str) -> SystemPreset:
        if name not in self.systems:
            known = ", ".join(sorted(self.systems))
            raise ConfigError(f"system.{name}: unknown preset (known: {known})")
        section = self.systems[name]
        where = f"system.{name}"
        unknown = set(section) - _SYSTEM_KEYS
        if unknown:
            raise ConfigError(f"{where}.{sorted(unknown)[0]}: unknown field")
        dets = section.get("detectors")
        if not isinstance(dets, list) or not dets:
            raise ConfigError(f"{where}.detectors: expected a non-empty list of preset names")
        return SystemPreset(
            name=name,
            detectors=tuple(dets),
            blinding_power=_number(section, "blinding_power", where),
            gate_period=_number(section, "gate_period", where, 200.0),
            gate_width=_number(section, "gate_width", where, 2.5),
            trigger_duration=_number(section, "trigger_duration", where, 2.5),
            trigger_offset=_number(section, "trigger_offset", where, 2.5),
        )

    def system_thresholds(self, name: str) -> list[ClickThresholds]:
        """Thresholds of every detector of a system at its nominal blinding power."""
        sys_preset = self.system(name)
        return [
            self.detector(d).thresholds_at(sys_preset.blinding_power) for d in sys_preset.detectors
        ]


def build_detector(name: str, section: Mapping[str, Any], schedule: GateSchedule | None = None) -> Detector:
    where = f"detector.{name}"
    unknown = set(section) - _DETECTOR_KEYS
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}: unknown field")
    try:
        p_blind = _number(section, "p_blind", where)
        base = DetectorElectrical(
            v_hv=_number(section, "v_hv", where, 50.0),
            r_bias=_number(section, "r_bias", where),
            gate_amplitude=_number(section, "gate_amplitude", where, 3.0),
            dc_margin=_number(section, "dc_margin", where, 0.5),
            v_br=section.get("v_br"),
        )
        if "responsivity" in section:
            responsivity = _number(section, "responsivity", where)
        else:
            responsivity = calibrate_responsivity(p_blind, base)
        p_never = _number(section, "p_never", where)
        p_always = _number(section, "p_always", where)
        elec = replace(base, responsivity=responsivity, i_th=responsivity * 0.5 * (p_never + p_always))
        thresholds = ClickThresholds(p_never=p_never, p_always=p_always, p_blind=p_blind)
        geiger = GeigerParams(
            efficiency=_number(section, "efficiency", where, 0.1),
            dark_count_prob=_number(section, "dark_count_prob", where, 0.0),
        )
        table = None
        if "threshold_table" in section:
            t = section["threshold_table"]
            table = ThresholdTable(
                blinding_power=tuple(float(x) for x in t["blinding_power"]),
                p_never=tuple(float(x) for x in t["p_never"]),
                p_always=tuple(float(x) for x in t["p_always"]),
            )
        thermal = None
        use_thermal = section.get("thermal", "thermal_onset" in section)
        if not isinstance(use_thermal, bool):
            raise ConfigError(f"{where}.thermal: expected true or false, got {use_thermal!r}")
        if use_thermal:
            dvbr = _number(section, "dvbr_per_kelvin", where, 0.1)
            onset = _number(section, "thermal_onset", where, DEFAULT_THERMAL_ONSET)
            # The onset is defined on the circuit with the bias resistor shorted.
            r_th = thermal_resistance_for_onset(onset, elec.shorted(), dvbr)
            thermal = ThermalParams(dvbr_per_kelvin=dvbr, thermal_resistance=r_th)
        if schedule is None:
            schedule = GateSchedule(
                period=_number(section, "gate_period", where, 200.0),
                gate_width=_number(section, "gate_width", where, 2.5),
            )
    except (DetectorError, KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return Detector(
        name=name,
        electrical=elec,
        thresholds=thresholds,
        geiger=geiger,
        schedule=schedule,
        threshold_table=table,
        thermal=thermal,
    )
