"""One QKD session: slot loop, optional eavesdropper and watchdog, then post-processing."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .attack import (
    AttackConfig,
    AttackError,
    EveRecord,
    FeasibilityReport,
    InfeasibleAttack,
    bob_prime_detectors,
    choose_trigger_power,
    emulate_dark_count,
    eve_click_probability,
    eve_intercept,
    eve_raw_key,
    eve_resend,
    feasible,
    match_rate,
    replay_transcript,
)
from .config import Scenario
from .countermeasure import Watchdog, WatchdogConfig
from .detector import ClickCause, Detector, GeigerParams
from .optics import Basis, OpticalFrame, amplify, analyzer_phase, attenuate, encode_phase, interfere
from .protocol.bb84 import BasisMode, SlotRecord, alice_prepare, bob_measure, estimate_qber, sift
from .protocol.privacy import output_length, privacy_amplify, random_seed, toeplitz_hash
from .protocol.reconciliation import QberAbort, error_correct
from .protocol.transcript import Abort, Transcript
from .rng import RandomStreams


def expected_click_rate(mu_at_bob: float, detectors: Sequence[Detector], basis_mode: BasisMode) -> float:
    """Attack-free probability that at least one of Bob's detectors clicks in a slot.

    Averages over Alice's four states and Bob's basis choices.
    """
    phases = [encode_phase(bit, basis) for bit in (0, 1) for basis in Basis]
    if basis_mode is BasisMode.PASSIVE:
        configs = [[(Basis.Z, 0.5, detectors[:2]), (Basis.X, 0.5, detectors[2:])]]
    else:
        configs = [[(basis, 1.0, detectors)] for basis in Basis]
    total = 0.0
    for phi in phases:
        for config in configs:
            p_none = 1.0
            for basis, share, pair in config:
                p0, p1 = interfere(mu_at_bob * share, analyzer_phase(basis) - phi)
                for d, m in zip(pair, (p0, p1)):
                    p_none *= (1 - d.geiger.dark_count_prob) * math.exp(-d.geiger.efficiency * m)
            total += 1.0 - p_none
    return total / (len(phases) * len(configs))


@dataclass
class SessionReport:
    slots: int
    bob_clicks: int
    double_clicks: int
    bob_click_rate: float
    expected_bob_click_rate: float
    sifted_length: int
    sifted_error_rate: float | None
    qber: float | None
    disclosed_bits: int
    corrected_length: int
    final_key_length: int
    final_keys_match: bool
    aborted: bool
    abort_reason: str | None
    click_causes: dict[str, int]
    alarms: list[dict]
    bob_bias_t1: dict[str, float]
    bob_blinded: dict[str, bool]
    attack_enabled: bool = False
    trigger_peak_power: float | None = None
    feasibility: dict | None = None
    eve_clicks: int | None = None
    forwarded: int | None = None
    emulated_dark_counts: int | None = None
    suppression_probability: float | None = None
    eve_agreement_raw: float | None = None
    eve_agreement_sifted: float | None = None
    eve_agreement_final: float | None = None

    _ATTACK_FIELDS = (
        "trigger_peak_power", "feasibility", "eve_clicks", "forwarded", "emulated_dark_counts",
        "suppression_probability", "eve_agreement_raw", "eve_agreement_sifted", "eve_agreement_final",
    )

    def to_dict(self) -> dict:
        d = asdict(self)
        if not self.attack_enabled:
            for k in self._ATTACK_FIELDS:
                d.pop(k)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def flat(self) -> dict:
        """Scalar fields only, nested dicts flattened with dots; for CSV rows."""
        out: dict[str, Any] = {}
        for k, v in self.to_dict().items():
            if k == "alarms":
                out["alarm_count"] = len(v)
            elif isinstance(v, dict):
                for kk, vv in v.items():
                    if not isinstance(vv, (list, dict)):
                        out[f"{k}.{kk}"] = vv
            else:
                out[k] = v
        return out


@dataclass
class SessionResult:
    report: SessionReport
    transcript: Transcript
    alice_records: list[SlotRecord]
    bob_records: list[SlotRecord]
    eve_records: list[EveRecord] | None
    bob_final: np.ndarray
    alice_final: np.ndarray
    eve_final: np.ndarray | None
    events: list[dict] = field(default_factory=list)

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


def _agreement(a: np.ndarray, b: np.ndarray) -> float | None:
    if a.size == 0:
        return None
    return float(np.count_nonzero(a == b)) / a.size


def _frame_summary(f: OpticalFrame) -> dict:
    return {
        "cw": f.cw_power, "pulse": f.pulse_peak_power, "phase": round(f.phase, 12),
        "mu": f.mean_photon_number,
    }


def build_bob_detectors(scenario: Scenario) -> list[Detector]:
    dets = [scenario.presets.detector(n, scenario.schedule) for n in scenario.bob_detectors]
    if scenario.basis_mode is BasisMode.PASSIVE:
        for i, d in enumerate(dets):
            d.name = f"{d.name}/{'ZX'[i // 2]}{i % 2}"
    return dets


def attack_feasibility(scenario: Scenario, detectors: Sequence[Detector]) -> FeasibilityReport:
    thresholds = [d.thresholds_at(scenario.attack.cw_power) for d in detectors]
    return feasible(thresholds, scenario.basis_mode)


def simulate(scenario: Scenario, seed: int | None = None, record_events: bool = False) -> SessionResult:
    """Run a full session.  Deterministic in ``(scenario, seed)``; ``seed`` defaults to the scenario's."""
    seed = scenario.seed if seed is None else seed
    streams = RandomStreams(seed)
    s_alice_bits = streams.stream("alice.bits")
    s_alice_bases = streams.stream("alice.bases")
    s_bob_bases = streams.stream("bob.bases")
    s_bob_noise = streams.stream("bob.detectors")
    s_bob_ties = streams.stream("bob.ties")
    s_flip_ae = streams.stream("channel.alice_eve")
    s_flip_eb = streams.stream("channel.eve_bob")

    n = scenario.slots
    mu = scenario.source.mu
    mode = scenario.basis_mode
    ae, eb = scenario.alice_eve, scenario.eve_bob
    bob_dets = build_bob_detectors(scenario)
    mu_at_bob = mu * ae.transmittance * eb.transmittance
    expected_rate = expected_click_rate(mu_at_bob, bob_dets, mode)

    att = scenario.attack
    attack_cfg = None
    feas = None
    suppression = 0.0
    if att.enabled:
        feas = attack_feasibility(scenario, bob_dets)
        if not feas:
            raise InfeasibleAttack(feas)
        attack_cfg = AttackConfig(
            cw_power=att.cw_power,
            trigger_peak_power=att.trigger_peak_power
            or choose_trigger_power([d.thresholds_at(att.cw_power) for d in bob_dets], mode),
            bob_basis_mode=mode,
            rate_match_target=expected_rate if att.rate_match else None,
            dark_count_emulation_rate=att.dark_count_emulation_rate,
            trigger_duration=att.trigger_duration,
            trigger_offset=att.trigger_offset,
        )
        if att.require_blinding:
            attack_cfg.check_blinding(bob_dets)
        bob_prime_geiger = GeigerParams(att.bob_prime_efficiency, att.bob_prime_dark_count_prob)
        bob_prime = bob_prime_detectors(bob_prime_geiger)
        if att.rate_match:
            eve_rate = eve_click_probability(mu * ae.transmittance, bob_prime_geiger)
            suppression = match_rate(eve_rate, expected_rate, att.dark_count_emulation_rate, mode)
        s_eve_bases = streams.stream("eve.bases")
        s_eve_noise = streams.stream("eve.detectors")
        s_eve_ties = streams.stream("eve.ties")
        s_suppress = streams.stream("eve.suppression")
        s_dark = streams.stream("eve.dark_emulation")

    watchdog = None
    if scenario.watchdog.enabled:
        w = scenario.watchdog
        watchdog = Watchdog(WatchdogConfig(
            threshold_power=w.threshold_power, integration_window=w.integration_window,
            period_ns=scenario.schedule.period, noise_floor=w.noise_floor,
            wavelength=scenario.source.wavelength,
        ))

    alice_records: list[SlotRecord] = []
    bob_records: list[SlotRecord] = []
    eve_records: list[EveRecord] = []
    events: list[dict] = []
    pi = math.pi
    for slot in range(n):
        frame, arec = alice_prepare(slot, s_alice_bits, mu, s_alice_bases)
        frame = attenuate(frame, ae.loss_db)
        if ae.flip_prob and s_flip_ae.random() < ae.flip_prob:
            frame = replace(frame, phase=frame.phase + pi)
        erec = None
        if attack_cfg is not None:
            erec = eve_intercept(frame, s_eve_noise, bob_prime, s_eve_bases, s_eve_ties)
            if erec.forwarded and suppression > 0 and s_suppress.random() < suppression:
                erec = replace(erec, forwarded=False)
            if not erec.forwarded and attack_cfg.dark_count_emulation_rate > 0:
                fake = emulate_dark_count(slot, attack_cfg.dark_count_emulation_rate, s_dark)
                if fake is not None:
                    erec = fake
            eve_records.append(erec)
            # Eve's amplifier pre-compensates the Eve-Bob loss.
            out = eve_resend(erec, attack_cfg)
            if eb.loss_db > 0:
                out = attenuate(amplify(out, eb.loss_db), eb.loss_db)
        else:
            out = attenuate(frame, eb.loss_db)
            if eb.flip_prob and s_flip_eb.random() < eb.flip_prob:
                out = replace(out, phase=out.phase + pi)
        alarm = watchdog.feed(out) if watchdog is not None else None
        brec = bob_measure(out, mode, bob_dets, s_bob_noise, s_bob_bases, s_bob_ties)
        alice_records.append(arec)
        bob_records.append(brec)
        if record_events:
            ev = {
                "type": "slot", "slot": slot,
                "alice": {"bit": arec.bit, "basis": arec.basis.value},
                "frame": _frame_summary(out),
                "bob": {
                    "basis": brec.basis.value if brec.basis else None, "bit": brec.resolved_bit,
                    "clicks": [brec.clicked0, brec.clicked1], "double": brec.double_click,
                    "causes": [c.value for c in brec.causes],
                },
            }
            if erec is not None:
                ev["eve"] = {
                    "basis": erec.basis.value if erec.basis else None, "bit": erec.bit,
                    "forwarded": erec.forwarded, "emulated": erec.emulated,
                }
            events.append(ev)
            if alarm is not None:
                events.append({"type": "alarm", **alarm.to_dict()})

    # Post-processing over the public channel.
    pp = scenario.postprocessing
    transcript = Transcript()
    sifted = sift(alice_records, bob_records, transcript)
    aborted, reason = False, None
    qber = None
    disclosed = 0
    corrected_len = 0
    bob_final = alice_final = np.zeros(0, dtype=np.uint8)
    if sifted.bob.size < 2:
        aborted, reason = True, "sifted key too short"
        transcript.append(Abort(reason=reason))
    else:
        qber, a_rest, b_rest = estimate_qber(
            sifted.alice, sifted.bob, pp.qber_sample_fraction, streams.generator("post.qber_sample"), transcript
        )
        try:
            ec = error_correct(
                a_rest, b_rest, transcript, qber=qber, rng=streams.generator("post.reconciliation"),
                block_sizes=pp.block_sizes, abort_threshold=pp.qber_abort, tag_bits=pp.tag_bits,
            )
        except QberAbort as exc:
            aborted, reason = True, str(exc)
        else:
            disclosed = ec.disclosed_bits
            corrected_len = int(ec.key.size)
            if not ec.verified:
                aborted, reason = True, "verification tag mismatch"
                transcript.append(Abort(reason=reason))
            else:
                out_len = output_length(corrected_len, disclosed, pp.pa_margin_bits)
                seed_bits = random_seed(streams.generator("post.privacy"), corrected_len, out_len)
                bob_final = privacy_amplify(ec.key, seed_bits, out_len, transcript)
                alice_final = toeplitz_hash(a_rest, seed_bits, out_len)

    causes = Counter(c.value for r in bob_records for c in r.causes)
    click_causes = {c.value: causes.get(c.value, 0) for c in ClickCause if c is not ClickCause.NONE}
    bob_clicks = sum(1 for r in bob_records if r.clicked)
    report = SessionReport(
        slots=n,
        bob_clicks=bob_clicks,
        double_clicks=sum(1 for r in bob_records if r.double_click),
        bob_click_rate=bob_clicks / n,
        expected_bob_click_rate=expected_rate,
        sifted_length=int(sifted.bob.size),
        sifted_error_rate=(float(np.count_nonzero(sifted.alice != sifted.bob)) / sifted.bob.size
                           if sifted.bob.size else None),
        qber=qber,
        disclosed_bits=disclosed,
        corrected_length=corrected_len,
        final_key_length=int(bob_final.size),
        final_keys_match=bool(np.array_equal(alice_final, bob_final)),
        aborted=aborted,
        abort_reason=reason,
        click_causes=click_causes,
        alarms=[a.to_dict() for a in watchdog.alarms] if watchdog else [],
        bob_bias_t1={d.name: d.bias for d in bob_dets} if n else {},
        bob_blinded={d.name: d.blinded for d in bob_dets},
        attack_enabled=att.enabled,
    )

    eve_final = None
    if att.enabled:
        raw = eve_raw_key(eve_records, n)
        bob_raw_slots = np.asarray([r.slot_index for r in bob_records if r.clicked], dtype=np.int64)
        bob_raw_bits = np.asarray([r.resolved_bit for r in bob_records if r.clicked], dtype=np.int8)
        if not aborted:
            eve_final = replay_transcript(raw, transcript)
        report.trigger_peak_power = attack_cfg.trigger_peak_power
        report.feasibility = feas.to_dict()
        report.eve_clicks = sum(1 for e in eve_records if e.clicked)
        report.forwarded = sum(1 for e in eve_records if e.forwarded)
        report.emulated_dark_counts = sum(1 for e in eve_records if e.emulated)
        report.suppression_probability = suppression
        report.eve_agreement_raw = _agreement(raw[bob_raw_slots] if bob_raw_slots.size else bob_raw_bits, bob_raw_bits)
        report.eve_agreement_sifted = _agreement(
            np.where(raw[sifted.indices] > 0, 1, 0).astype(np.uint8) if sifted.indices.size else sifted.bob,
            sifted.bob,
        )
        if eve_final is not None:
            report.eve_agreement_final = _agreement(eve_final, bob_final)

    if record_events:
        events.extend({"type": "transcript", **m.to_dict()} for m in transcript)

    return SessionResult(
        report=report,
        transcript=transcript,
        alice_records=alice_records,
        bob_records=bob_records,
        eve_records=eve_records if att.enabled else None,
        bob_final=bob_final,
        alice_final=alice_final,
        eve_final=eve_final,
        events=events,
    )


def run_session(scenario: Scenario, seed: int | None = None) -> SessionReport:
    return simulate(scenario, seed).report


__all__ = [
    "AttackError", "SessionReport", "SessionResult", "build_bob_detectors", "expected_click_rate",
    "run_session", "simulate",
]
