"""Figures written next to sweep CSV files."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def _by_detector(rows):
    groups = defaultdict(list)
    for r in rows:
        groups[r["detector"]].append(r)
    return groups


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_bias_curve(rows: Sequence[Mapping], path: str | Path, p_blind: Mapping[str, float] | None = None,
                    blind_bias: float | None = None) -> Path:
    """Bias versus CW power; ``blind_bias`` is the level below which the gate no longer reaches breakdown."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, rs in _by_detector(rows).items():
            x = [r["cw_power"] * 1e6 for r in rs]
            (line,) = ax.plot(x, [r["bias_t1"] for r in rs], label=name)
            if p_blind and name in p_blind:
                ax.axvline(p_blind[name] * 1e6, color=line.get_color(), ls=":", lw=1)
        if blind_bias is not None:
            ax.axhline(blind_bias, color="0.4", ls="--", lw=1, label="blinding level")
        ax.set_xlabel("CW power (µW)")
        ax.set_ylabel("Bias at T1 (V)")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_click_curve(rows: Sequence[Mapping], path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, rs in _by_detector(rows).items():
            x = [r["trigger_power"] * 1e6 for r in rs]
            (line,) = ax.plot(x, [r["click_fraction"] for r in rs], "o", ms=3, label=name)
            ax.plot(x, [r["model_probability"] for r in rs], "-", color=line.get_color(), lw=1)
        ax.set_xlabel("Trigger peak power (µW)")
        ax.set_ylabel("Click probability")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_session_sweep(rows: Sequence[Mapping], param: str, path: str | Path,
                       columns: Sequence[str] = ("bob_click_rate", "qber", "eve_agreement_final")) -> Path:
    columns = [c for c in columns if any(r.get(c) is not None for r in rows)]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(columns), 1, sharex=True, squeeze=False,
                                 figsize=(6.0, 1.0 + 1.8 * max(1, len(columns))))
        x = [r[param] for r in rows]
        for ax, col in zip(axes[:, 0], columns):
            y = [float("nan") if r.get(col) is None else r[col] for r in rows]
            ax.plot(x, y, "o-", ms=3)
            ax.set_ylabel(col)
        axes[-1, 0].set_xlabel(param)
        return _save(fig, path)
