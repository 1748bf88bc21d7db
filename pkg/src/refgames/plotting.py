"""Figures written next to the CLI's delimited outputs (opt-in via ``--plot``).

Everything renders through the Agg backend into PNG files; nothing is shown
interactively.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

DPI = 120


def _outline(ax, domain) -> None:
    if domain is None:
        return
    pts = np.asarray(domain.points)
    if not domain.is_segment:
        pts = np.vstack([pts, pts[:1]])
    ax.plot(pts[:, 0], pts[:, 1], color="0.3", lw=1.0)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_samples(samples: np.ndarray, domain, path: Path, bins: int = 100) -> Path:
    """Histogram of player 1's payoff and a scatter of the payoff pairs."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.hist(samples[:, 0], bins=bins, density=True, color="C0")
    ax1.set_xlabel("payoff 1")
    ax1.set_ylabel("density")
    shown = samples[: min(len(samples), 20000)]
    ax2.scatter(shown[:, 0], shown[:, 1], s=1, alpha=0.3, color="C1")
    _outline(ax2, domain)
    ax2.set_xlabel("payoff 1")
    ax2.set_ylabel("payoff 2")
    ax2.set_aspect("equal", adjustable="datalim")
    return _save(fig, path)


def plot_cdf(xs: np.ndarray, F: np.ndarray, path: Path, marks: Sequence[float] = ()) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(xs, F, color="C0")
    for m in marks:
        ax.axvline(m, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("F(x)")
    ax.set_ylim(-0.02, 1.02)
    return _save(fig, path)


def plot_measure(measure, path: Path, point: Sequence[float] | None = None, domain=None) -> Path:
    """Log-scaled heat map of a grid measure."""
    fig, ax = plt.subplots(figsize=(5, 4.5))
    x0, y0, x1, y1 = measure.box
    m = np.where(measure.mass > 0, measure.mass, np.nan)
    im = ax.imshow(np.log10(m).T, origin="lower", extent=(x0, x1, y0, y1), aspect="auto", cmap="viridis")
    fig.colorbar(im, ax=ax, label="log10 cell mass")
    _outline(ax, domain)
    if point is not None:
        ax.plot([point[0]], [point[1]], "r+", ms=10)
    ax.set_xlabel("payoff 1")
    ax.set_ylabel("payoff 2")
    return _save(fig, path)


def plot_track(track, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    sx, xs = track.x_sequence()
    sy, ys = track.y_sequence()
    ax.plot(sx, xs, ".-", ms=3, label="x")
    ax.plot(sy, ys, ".-", ms=3, label="y")
    ax.set_xlabel("level")
    ax.set_ylabel(f"quantile at {track.level:.4f}")
    ax.legend()
    return _save(fig, path)


def plot_ref(points: np.ndarray, eps: Sequence[float], estimate, median, path: Path, domain=None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    _outline(ax, domain)
    ax.plot(points[:, 0], points[:, 1], "o-", ms=4, label="hybrid concentration points")
    for (x, y), e in zip(points, eps):
        ax.annotate(f"{e:g}", (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.plot([estimate[0]], [estimate[1]], "r*", ms=10, label="extrapolated limit")
    ax.plot([median[0]], [median[1]], "kx", ms=8, label="random-schedule medians")
    ax.set_xlabel("payoff 1")
    ax.set_ylabel("payoff 2")
    ax.legend(fontsize=8)
    return _save(fig, path)
