"""Phase-encoded BB84 link with gated APD detectors and a detector-blinding eavesdropper."""

from .attack import (
    AttackConfig,
    EveRecord,
    FeasibilityReport,
    choose_trigger_power,
    emulate_dark_counts,
    eve_intercept,
    eve_resend,
    feasible,
    match_rate,
    replay_transcript,
)
from .config import ConfigError, Scenario
from .countermeasure import Alarm, Watchdog, WatchdogConfig, monitor
from .detector import (
    ClickCause,
    ClickOutcome,
    ClickThresholds,
    Detector,
    DetectorElectrical,
    GateSchedule,
    GeigerParams,
    Incident,
    ThermalParams,
    bias_at_t1,
    calibrate_responsivity,
    detect_frame,
    geiger_click,
    is_blinded,
    linear_click,
    thermal_blind_shift,
)
from .optics import Basis, ChannelParams, OpticalFrame, amplify, attenuate, encode_phase, interfere
from .presets import Presets
from .session import SessionReport, run_session, simulate
from .sweep import sweep

__version__ = "0.1.0"
