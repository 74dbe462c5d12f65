"""Command-line entry point: ``blindqkd run|sweep|feasibility|calibrate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .attack import AttackError, feasible
from .config import ConfigError, Scenario, parse_value
from .detector import calibrate_responsivity
from .presets import Presets
from .protocol.bb84 import BasisMode
from .rng import RandomStreams
from .session import build_bob_detectors, simulate
from .sweep import SweepError, bias_curve, click_curve, sweep, write_csv

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INVALID = 2


def _parse_values(text: str) -> list:
    """Comma list ``a,b,c`` or linear range ``start:stop:count``."""
    if text.count(":") == 2 and "," not in text:
        start, stop, num = text.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(num))]
    values = [parse_value(v) for v in text.split(",") if v.strip()]
    if not values:
        raise SweepError("--values is empty")
    return values


def cmd_run(args) -> int:
    scenario = Scenario.from_file(args.scenario)
    result = simulate(scenario, args.seed, record_events=args.events is not None)
    text = result.report.to_json()
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    if args.events:
        Path(args.events).write_text(result.events_jsonl())
    if args.transcript:
        Path(args.transcript).write_text(result.transcript.to_jsonl())
    return EXIT_OK


def _figure_path(args) -> Path | None:
    if args.no_figure:
        return None
    return Path(args.figure) if args.figure else Path(args.out).with_suffix(".png")


def cmd_sweep(args) -> int:
    from . import plotting

    scenario = Scenario.from_file(args.scenario)
    values = _parse_values(args.values)
    figure = _figure_path(args)
    seed = scenario.seed if args.seed is None else args.seed

    if args.param.startswith("detector."):
        seen = set()
        detectors = []
        for d in build_bob_detectors(scenario):
            base = d.name.split("/")[0]
            if base not in seen:
                seen.add(base)
                d.name = base
                detectors.append(d)
        if args.param == "detector.cw_power":
            rows = [r for d in detectors for r in bias_curve(d, values)]
            write_csv(rows, args.out)
            if figure:
                levels = {d.electrical.v_br - d.electrical.gate_amplitude for d in detectors}
                plotting.plot_bias_curve(rows, figure, {d.name: d.thresholds.p_blind for d in detectors},
                                         levels.pop() if len(levels) == 1 else None)
        elif args.param == "detector.trigger_power":
            rng = RandomStreams(seed).generator("sweep.clicks")
            cw = scenario.attack.cw_power
            rows = [r for d in detectors for r in click_curve(d, values, args.trials, rng, cw)]
            write_csv(rows, args.out)
            if figure:
                plotting.plot_click_curve(rows, figure)
        else:
            raise ConfigError(f"{args.param}: detector sweeps support cw_power and trigger_power")
    else:
        rows = sweep(scenario, {args.param: values}, seed=seed, workers=args.workers)
        write_csv(rows, args.out)
        if figure:
            plotting.plot_session_sweep(rows, args.param, figure)
    print(f"wrote {len(rows)} rows to {args.out}" + (f" and figure {figure}" if figure else ""))
    return EXIT_OK


def cmd_feasibility(args) -> int:
    target = Path(args.target)
    if target.is_file():
        scenario = Scenario.from_file(target)
        dets = build_bob_detectors(scenario)
        thresholds = [d.thresholds_at(scenario.attack.cw_power) for d in dets[:2]]
        mode = BasisMode(args.basis_mode) if args.basis_mode else scenario.basis_mode
    else:
        thresholds = Presets.builtin().system_thresholds(args.target)
        mode = BasisMode(args.basis_mode or "active")
    report = feasible(thresholds, mode)
    print(report)
    return EXIT_OK if report else EXIT_INFEASIBLE


def cmd_calibrate(args) -> int:
    presets = Presets.builtin()
    names = list(presets.system(args.preset).detectors) if args.preset in presets.systems else [args.preset]
    for name in names:
        d = presets.detector(name)
        elec = d.electrical
        r = calibrate_responsivity(d.thresholds.p_blind, elec)
        print(
            f"{name}: p_blind {d.thresholds.p_blind * 1e6:.6g} µW, r_bias {elec.r_bias:.6g} Ω, "
            f"excess bias {elec.gate_amplitude - elec.dc_margin:.6g} V, responsivity {r:.4f} A/W"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blindqkd", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one session and print its report")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--report", help="write the JSON report here instead of stdout")
    r.add_argument("--events", help="write the per-slot event log (JSON lines)")
    r.add_argument("--transcript", help="write the public transcript (JSON lines)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one parameter; writes CSV and a figure")
    s.add_argument("scenario")
    s.add_argument("--param", required=True,
                   help="dotted scenario path, or detector.cw_power / detector.trigger_power")
    s.add_argument("--values", required=True, help="a,b,c or start:stop:count")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--trials", type=int, default=10_000, help="pulses per point for detector.trigger_power")
    s.add_argument("--figure", help="figure path (default: CSV path with .png)")
    s.add_argument("--no-figure", action="store_true")
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("feasibility", help="check the trigger-window condition for a system or scenario")
    f.add_argument("target", help="system preset name (clavis2, qpn5505) or scenario file")
    f.add_argument("--basis-mode", choices=["active", "passive"])
    f.set_defaults(func=cmd_feasibility)

    c = sub.add_parser("calibrate", help="print the responsivity calibration of a preset")
    c.add_argument("preset", help="system or detector preset name")
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AttackError, SweepError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
