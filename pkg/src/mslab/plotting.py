"""Render sweep results to figure files next to the delimited output."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .experiments import PLOTDATA_FIGURES, SweepResult

_COLORS = {"ms": "tab:gray", "bms": "tab:orange", "sms": "tab:blue", "dsms": "tab:red"}
_STYLE = {"acp": "-", "alp": "--", "k": "-", "cluster_count": "-"}


def _series(result: SweepResult, algo: str, metric: str):
    rows = sorted(
        (r for r in result.rows if r.algo == algo and r.metric == metric),
        key=lambda r: r.sweep_var,
    )
    x = [r.sweep_var for r in rows]
    y = [r.mean for r in rows]
    err = [
        [r.mean - r.ci_lo for r in rows],
        [r.ci_hi - r.mean for r in rows],
    ]
    return x, y, err


def render_figures(result: SweepResult, out_base) -> list:
    """Write one PNG per figure for the sweep; returns the written paths."""
    out_base = Path(out_base)
    written = []
    for fig_name, metrics, xlabel in PLOTDATA_FIGURES[result.kind]:
        fig, ax = plt.subplots(figsize=(5.4, 3.6))
        algos = sorted({r.algo for r in result.rows})
        for algo in algos:
            for metric in metrics:
                x, y, err = _series(result, algo, metric)
                if not x:
                    continue
                label = algo if len(metrics) == 1 else f"{algo} {metric}"
                ax.errorbar(
                    x,
                    y,
                    yerr=err,
                    label=label,
                    color=_COLORS.get(algo),
                    linestyle=_STYLE.get(metric, "-"),
                    marker="o",
                    markersize=3,
                    capsize=2,
                )
        if result.kind == "sparse":
            ax.axhline(3.0, color="black", linestyle=":", linewidth=0.8)
            ax.set_ylabel("mean cluster count")
        else:
            ax.set_ylabel(" / ".join(metrics))
        ax.set_xlabel(xlabel)
        ax.legend(fontsize=8)
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
        path = out_base.with_name(f"{out_base.stem}_{fig_name}.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written
