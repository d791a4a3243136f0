"""Static plot emission (vertically offset traces, vector output)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_traces(
    series: Sequence[tuple[str, np.ndarray, np.ndarray]],
    out_path,
    dips: bool = False,
    contrast: float = 0.3,
    offset_step: float = 1.1,
) -> None:
    """Write stacked line traces to a vector-graphics file or buffer.

    Traces are offset vertically in input order. With `dips=True` the line
    strength is rendered in the fluorescence-dip convention
    1 - contrast * intensity. Buffers (no filename suffix) are written as SVG.
    """
    if not series:
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(7.0, 1.6 + 1.4 * len(series)))
    for k, (label, freqs, values) in enumerate(series):
        y = 1.0 - contrast * np.asarray(values) if dips else np.asarray(values)
        ax.plot(np.asarray(freqs), y + k * offset_step, lw=0.8, label=label)
    ax.set_xlabel("MW frequency (MHz)")
    ax.set_ylabel("normalized intensity (offset)")
    if len(series) > 1 or series[0][0]:
        ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fmt = None if isinstance(out_path, (str, Path)) and Path(out_path).suffix else "svg"
    fig.savefig(out_path, format=fmt)
    plt.close(fig)
