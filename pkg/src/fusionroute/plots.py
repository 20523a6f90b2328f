"""Render sweep results to figure files next to the CSV output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import Algorithm, ResultRow, _fmt_value

_STYLES = {
    Algorithm.NFUSION: dict(color="tab:red", marker="o"),
    Algorithm.ALG3ONLY: dict(color="tab:orange", marker="s"),
    Algorithm.QCAST: dict(color="tab:blue", marker="^"),
    Algorithm.QCASTN: dict(color="tab:green", marker="d"),
}

_LABELS = {
    Algorithm.NFUSION: "fusion routing",
    Algorithm.ALG3ONLY: "fusion routing, no residual pass",
    Algorithm.QCAST: "pair swapping",
    Algorithm.QCASTN: "pair-swap routes, fusion scoring",
}

_AXIS_LABELS = {
    "p_uniform": "uniform link success probability",
    "q": "swap success probability",
    "capacity": "qubits per switch",
    "n_switches": "number of switches",
    "n_demands": "number of demands",
    "avg_degree": "average switch degree",
    "generator": "topology model",
}


def plot_sweep(rows: Sequence[ResultRow], out_path: str | Path) -> Path:
    """One figure: mean total rate vs the swept value, one line per algorithm."""
    out_path = Path(out_path)
    if not rows:
        raise ValueError("nothing to plot")
    variable = rows[0].variable
    values = list(dict.fromkeys(_fmt_value(r.value) for r in rows))
    numeric = variable.value != "generator"

    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for algo in Algorithm:
        series = [r for r in rows if r.algorithm is algo]
        if not series:
            continue
        by_value = {_fmt_value(r.value): r.mean_rate for r in series}
        ys = [by_value.get(v) for v in values]
        xs = [float(v) for v in values] if numeric else range(len(values))
        ax.plot(xs, ys, label=_LABELS[algo], linewidth=1.4, markersize=5, **_STYLES[algo])
    if not numeric:
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels(values)
    ax.set_xlabel(_AXIS_LABELS.get(variable.value, variable.value))
    ax.set_ylabel("network entanglement rate")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, framealpha=0.9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
