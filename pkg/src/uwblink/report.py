"""Experiment reporting: BER figures, gnuplot scripts and text summaries."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ber import BerCurve, snr_at_ber

_STYLES = {
    "rake": dict(color="tab:red", marker="o"),
    "mmse": dict(color="tab:green", marker="s"),
    "rake-le": dict(color="tab:blue", marker="^"),
    "rake-dfe": dict(color="tab:purple", marker="v"),
}


def save_ber_figure(curves: dict[str, BerCurve], path, title: str = "") -> None:
    """Render log-scale BER vs Eb/N0, one series per receiver, to a file."""
    if not curves:
        raise ValueError("no curves to plot")
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for name, curve in curves.items():
        style = _STYLES.get(name, {})
        ber = np.maximum(curve.bers(), 1e-12)
        ax.semilogy(curve.snr_grid(), ber, label=name, **style)
    ax.set_xlabel("Eb/N0 (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def emit_plot_script(csv_paths: dict[str, str], path) -> None:
    """Write a gnuplot script that draws every curve CSV on one log axis.

    No plotting happens in-process; the script is a plain-text artifact
    that can be re-run against the CSVs at any time.
    """
    if not csv_paths:
        raise ValueError("no curves to plot")
    lines = [
        "# gnuplot script: BER vs Eb/N0",
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'Eb/N0 (dB)'",
        "set ylabel 'BER'",
        "set grid",
        "set key bottom left",
    ]
    plots = [
        f"'{csv}' using 1:2 skip 1 with linespoints title '{name}'"
        for name, csv in sorted(csv_paths.items())
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def summarize(curves: dict[str, BerCurve], target: float = 1e-3) -> str:
    """SNR at the target BER per receiver, plus pairwise dB gains."""
    lines = [f"SNR (dB) at BER {target:g}:"]
    crossings = {}
    for name, curve in curves.items():
        s = snr_at_ber(curve, target)
        crossings[name] = s
        lines.append(f"  {name:10s} {s:6.2f}" if np.isfinite(s) else f"  {name:10s}    n/a")
    names = [n for n, s in crossings.items() if np.isfinite(crossings[n])]
    if len(names) > 1:
        lines.append("Pairwise gains (row over column, dB):")
        for a in names:
            for b in names:
                if a != b and crossings[b] > crossings[a]:
                    lines.append(f"  {a} vs {b}: {crossings[b] - crossings[a]:.2f}")
    return "\n".join(lines)
