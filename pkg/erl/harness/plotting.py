"""Convergence plots: log-scale error against iteration, one line per label."""
from pathlib import Path
from typing import Union

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

FLOOR = 1e-16

# fixed ids and no timestamp keep the SVG stable across reruns
SVG_PARAMS = {"svg.fonttype": "none", "svg.hashsalt": "erl"}


def convergence_figure(summary: pd.DataFrame, title: str = "") -> Figure:
    """Mean error per label with a shaded +/- one standard deviation band."""
    fig = Figure(figsize=(6.4, 4.0))
    ax = fig.subplots()
    for label, frame in summary.groupby("label", sort=False):
        iterations = frame["iteration"].to_numpy(dtype=float)
        mean = frame["mean_error"].to_numpy(dtype=float)
        std = frame["std_error"].to_numpy(dtype=float)
        (line,) = ax.plot(iterations, np.maximum(mean, FLOOR), label=str(label), linewidth=1.5)
        ax.fill_between(
            iterations,
            np.maximum(mean - std, FLOOR),
            np.maximum(mean + std, FLOOR),
            color=line.get_color(),
            alpha=0.2,
        )

    if not summary.empty:
        ax.set_yscale("log")
        ax.legend(loc="upper right")
    ax.set_xlabel("iteration")
    ax.set_ylabel("error")
    ax.grid(True, which="major", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def save_convergence_svg(
    summary: pd.DataFrame, path: Union[str, Path], title: str = ""
) -> Path:
    path = Path(path)
    fig = convergence_figure(summary, title=title)
    with matplotlib.rc_context(SVG_PARAMS):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
