"""Parameter sweeps over sessions and single detectors, with CSV output."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .config import Scenario
from .detector import Detector, DetectorMode, Incident, bias_at_t1, linear_click_probability
from .session import run_session


class SweepError(ValueError):
    pass


def expand_grid(grid: Mapping[str, Sequence[Any]] | Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Cartesian product of a ``{path: values}`` mapping, or an explicit list of points."""
    if isinstance(grid, Mapping):
        if not grid or any(len(v) == 0 for v in grid.values()):
            raise SweepError("parameter grid is empty")
        keys = list(grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    points = [dict(p) for p in grid]
    if not points:
        raise SweepError("parameter grid is empty")
    return points


def _run_point(args) -> dict:
    index, template, point, seed = args
    scenario = template
    for path, value in point.items():
        scenario = scenario.with_value(path, value)
    report = run_session(scenario, seed)
    return {"index": index, **point, **report.flat()}


def sweep(
    template: Scenario,
    grid: Mapping[str, Sequence[Any]] | Sequence[Mapping[str, Any]],
    seed: int | None = None,
    workers: int = 1,
) -> list[dict]:
    """One session per grid point; rows come back sorted by grid index."""
    jobs = [(i, template, p, seed) for i, p in enumerate(expand_grid(grid))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    return sorted(rows, key=lambda r: r["index"])


def bias_curve(detector: Detector, powers: Iterable[float]) -> list[dict]:
    """Bias at T1 and blinding state versus CW power."""
    rows = []
    for p in powers:
        p = float(p)
        mode = detector.expose(p)
        rows.append({
            "detector": detector.name,
            "cw_power": p,
            "bias_t1": bias_at_t1(p, detector.electrical),
            "blinded": mode is DetectorMode.LINEAR,
        })
    return rows


def click_curve(
    detector: Detector,
    powers: Iterable[float],
    trials: int,
    rng: np.random.Generator,
    cw_power: float,
) -> list[dict]:
    """Empirical click fraction of a blinded detector versus superimposed trigger power."""
    rows = []
    for p in powers:
        p = float(p)
        clicks = 0
        for _ in range(trials):
            clicks += detector.respond(Incident(cw_power, p), rng).clicked
        rows.append({
            "detector": detector.name,
            "trigger_power": p,
            "trials": trials,
            "clicks": clicks,
            "click_fraction": clicks / trials,
            "model_probability": linear_click_probability(p, detector.thresholds_at(cw_power)),
        })
    return rows


def write_csv(rows: Sequence[Mapping[str, Any]], path: str | Path) -> None:
    if not rows:
        raise SweepError("no rows to write")
    header: list[str] = []
    for row in rows:
        header.extend(k for k in row if k not in header)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in header})
