"""
PNG figures for envelope tests, pre-judgement curves and density maps.
Plain data plots on the Agg backend; no basemaps.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.analysis.summary import DensityMap, SummaryCurve  # noqa: E402
from src.models.pattern import PointPattern  # noqa: E402
from src.validation.envelope import Envelope  # noqa: E402

logger = logging.getLogger(__name__)

AXIS_LABELS = {
    "G": ("r", "G(r)"),
    "K": ("r", "K(r)"),
    "L": ("r", "L(r)"),
    "coverage": ("SINR threshold T (dB)", "P(SINR > T)"),
}


def _save(fig, output_path: Path) -> Path:
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    logger.info("Figure written to %s", output_path)
    return output_path


def plot_envelope(envelope: Envelope, observed: SummaryCurve, output_path: Path, title: Optional[str] = None) -> Path:
    """Shaded envelope with the observed curve and, if present, its reference."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.fill_between(envelope.grid, envelope.lower, envelope.upper, color="0.8",
                    label=f"envelope (alpha={envelope.alpha:.2g})")
    ax.plot(observed.grid, observed.values, color="black", lw=1.5, label="observed")
    if observed.reference is not None:
        ax.plot(observed.grid, observed.reference, color="tab:red", ls="--", lw=1, label="Poisson reference")
    xlabel, ylabel = AXIS_LABELS[envelope.kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    return _save(fig, output_path)


def plot_curve(curve: SummaryCurve, output_path: Path, title: Optional[str] = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(curve.grid, curve.values, color="black", lw=1.5, label="estimate")
    if curve.reference is not None:
        ax.plot(curve.grid, curve.reference, color="tab:red", ls="--", lw=1, label="Poisson")
    xlabel, ylabel = AXIS_LABELS[curve.kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    return _save(fig, output_path)


def plot_density(density: DensityMap, output_path: Path, pattern: Optional[PointPattern] = None) -> Path:
    w = density.window
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(density.values, origin="lower", extent=(w.x_min, w.x_max, w.y_min, w.y_max),
                   cmap="viridis", aspect="equal")
    if pattern is not None and pattern.n:
        ax.scatter(pattern.coords[:, 0], pattern.coords[:, 1], s=2, c="white", alpha=0.6)
    fig.colorbar(im, ax=ax, label="intensity")
    ax.set_title(f"Kernel density (h={density.bandwidth:.3g})")
    return _save(fig, output_path)
