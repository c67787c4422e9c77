"""Figures for batch evaluation reports, rendered to files next to the CSV."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_report_figures(rows: list[dict], out_dir) -> list[Path]:
    """Write dsc_per_case.png and volume_agreement.png; returns the paths.

    ``rows`` is the output of evaluation.report_rows (per-case rows followed
    by the min/max/mean/std summary block).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_ids = {"min", "max", "mean", "std"}
    cases = [r for r in rows if r["id"] not in summary_ids]
    if not cases:
        raise ValueError("no cases to plot")
    mean_dsc = next(r["dsc"] for r in rows if r["id"] == "mean")

    ids = [r["id"] for r in cases]
    written = []

    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(cases) + 2.0), 3.2))
    ax.bar(range(len(cases)), [r["dsc"] for r in cases], color="#4878cf")
    ax.axhline(mean_dsc, color="#d65f5f", linestyle="--", linewidth=1,
               label=f"mean {mean_dsc:.2f}%")
    ax.set_xticks(range(len(cases)))
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("DSC (%)")
    ax.set_ylim(0, 100)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = out_dir / "dsc_per_case.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(3.6, 3.6))
    ref = [r["vol_ref"] for r in cases]
    auto = [r["vol_auto"] for r in cases]
    lim = max(max(ref), max(auto)) * 1.1 or 1.0
    ax.plot([0, lim], [0, lim], color="0.6", linewidth=1)
    ax.scatter(ref, auto, s=18, color="#4878cf", zorder=3)
    ax.set_xlabel("reference volume (cm$^3$)")
    ax.set_ylabel("automatic volume (cm$^3$)")
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    fig.tight_layout()
    path = out_dir / "volume_agreement.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
