"""Figure helpers. Figures are written straight to files; no display needed."""

from __future__ import annotations

import io
from contextlib import contextmanager

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    # fixed salt and no date stamp keep SVG output byte-stable
    "svg.hashsalt": "stockcast",
    "svg.fonttype": "none",
}


def size(scale: float = 1.0) -> tuple[float, float]:
    width = 6.0 * scale
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    return width, width * golden


@contextmanager
def figure(scale: float = 1.0):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=size(scale))
        try:
            yield fig, ax
        finally:
            plt.close(fig)


def to_svg(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    return buf.getvalue()


def per_day_figure(labels, mean, low=None, high=None, title: str = "", rounds=None) -> bytes:
    """Bars of mean per-day RMSE, min-max whiskers, one faint line per round."""
    with figure() as (fig, ax):
        x = np.arange(len(labels))
        mean = np.asarray(mean, dtype=float)
        yerr = None
        if low is not None and high is not None:
            yerr = np.vstack([mean - np.asarray(low), np.asarray(high) - mean])
        ax.bar(x, mean, width=0.6, color="#4c72b0", yerr=yerr, capsize=3, label="mean over rounds")
        for row in rounds or []:
            ax.plot(x, row, color="0.3", lw=0.6, alpha=0.5, marker=".", ms=3)
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_xlabel("day of week")
        ax.set_ylabel("RMSE")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper left", frameon=False)
        return to_svg(fig)


def forecast_figure(week_starts, actuals, predictions, title: str = "") -> bytes:
    """Actual vs predicted opens over the test period, week by week."""
    actuals = np.asarray(actuals, dtype=float).reshape(-1)
    predictions = np.asarray(predictions, dtype=float).reshape(-1)
    with figure(1.4) as (fig, ax):
        t = np.arange(len(actuals))
        ax.plot(t, actuals, color="k", lw=1.0, label="actual")
        ax.plot(t, predictions, color="#dd8452", lw=1.0, label="forecast")
        step = max(1, len(week_starts) // 8)
        ax.set_xticks(t[:: 5 * step])
        ax.set_xticklabels(week_starts[::step], rotation=30, ha="right")
        ax.set_ylabel("open")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return to_svg(fig)
