"""Figure rendering for analysis reports.

SVG output is kept byte-deterministic (fixed hash salt, no embedded dates) so
plots can be golden-file tested alongside the delimited reports.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "rirkit"

import matplotlib.pyplot as plt

from .analysis import ImpulseResponse, schroeder_edc
from .errors import SilentIrError


def plot_edc(ir: ImpulseResponse, out_path, title: str = "") -> Path:
    """Energy decay curves of every channel, written as SVG."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(7, 4))
    for ch in range(ir.n_channels):
        try:
            edc = schroeder_edc(ir, ch)
        except SilentIrError:
            continue
        ax.plot(edc.times, edc.values, lw=1.0, label=f"ch {ch}")
    ax.axhline(-5.0, color="0.6", lw=0.7, ls="--")
    ax.axhline(-35.0, color="0.6", lw=0.7, ls="--")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("energy decay [dB]")
    ax.set_ylim(-80, 2)
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path
