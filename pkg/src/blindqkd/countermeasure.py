"""Watchdog power meter at Bob's entrance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .optics import DEFAULT_WAVELENGTH, OpticalFrame


@dataclass(frozen=True)
class WatchdogConfig:
    """Alarm when the mean power over ``integration_window`` slots exceeds ``threshold_power``.

    ``noise_floor`` is the lowest reading the meter can produce (0 disables it).
    """

    threshold_power: float
    integration_window: int = 1
    period_ns: float = 200.0
    noise_floor: float = 0.0
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        if self.threshold_power <= 0:
            raise ValueError("threshold_power must be > 0")
        if self.integration_window < 1:
            raise ValueError("integration_window must be >= 1")
        if self.period_ns <= 0:
            raise ValueError("period_ns must be > 0")


@dataclass(frozen=True)
class Alarm:
    slot_index: int
    measured_power: float

    def to_dict(self) -> dict:
        return {"slot": self.slot_index, "power": self.measured_power}


class Watchdog:
    """Streaming meter over consecutive non-overlapping windows."""

    def __init__(self, config: WatchdogConfig):
        self.config = config
        self.alarms: list[Alarm] = []
        self._sum = 0.0
        self._count = 0

    def feed(self, frame: OpticalFrame) -> Alarm | None:
        cfg = self.config
        self._sum += frame.average_power(cfg.period_ns, cfg.wavelength)
        self._count += 1
        if self._count < cfg.integration_window:
            return None
        reading = max(self._sum / self._count, cfg.noise_floor)
        self._sum, self._count = 0.0, 0
        if reading > cfg.threshold_power:
            alarm = Alarm(frame.slot_index, reading)
            self.alarms.append(alarm)
            return alarm
        return None


def monitor(frames: Iterable[OpticalFrame], config: WatchdogConfig) -> list[Alarm]:
    watchdog = Watchdog(config)
    for frame in frames:
        watchdog.feed(frame)
    return watchdog.alarms
