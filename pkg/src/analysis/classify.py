"""
Clustering / repulsion pre-judgement.

A pattern is Clustered if L(r) >= r and Repulsive if L(r) <= r at every grid
point of (0, interval_max], where a point counts against a verdict only when it
leaves a band of a few Poisson standard errors around the diagonal.
``survey_subregions`` repeats the verdict on random square sub-windows and
reports label fractions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.analysis.summary import SummaryCurve, g_function, k_function, l_from_k
from src.models.pattern import PointPattern, Window, min_pair_distance, nn_distances, rescale_to_unit
from src.utils import constants as C
from src.utils.errors import ConfigError, DataError
from src.utils.rng import make_rng

logger = logging.getLogger(__name__)


class InteractionVerdict(str, Enum):
    CLUSTERED = "clustered"
    REPULSIVE = "repulsive"
    NEITHER = "neither"


def classify_grid(interval_max: float = C.CLASSIFY_INTERVAL_MAX, n_grid: int = C.CLASSIFY_GRID_SIZE) -> np.ndarray:
    """``n_grid`` equally spaced values over (0, interval_max]."""
    return interval_max * np.arange(1, n_grid + 1) / n_grid


def l_standard_error(n: int, area: float) -> float:
    """
    Standard deviation of L(r) - r for a Poisson pattern of ``n`` points. L is the
    square root of a pair count, which stabilizes the variance: the value does not
    depend on r.
    """
    if n < 2:
        raise DataError(f"Standard error needs at least 2 points, got {n}")
    return math.sqrt(area / (2.0 * math.pi * n * (n - 1)))


def verdict_from_l(l_curve: SummaryCurve, informative_from: float = 0.0, tolerance: float = 0.0) -> InteractionVerdict:
    """
    Apply the every-r rule up to ``tolerance``.

    Grid points below ``informative_from`` (the smallest interpoint distance,
    where K is zero by construction) are skipped. Clustered means no remaining
    point has L(r) < r - tolerance; Repulsive means none has L(r) > r + tolerance.
    When the whole curve stays inside the band the strict rule decides.
    """
    if tolerance < 0:
        raise ConfigError(f"tolerance must be >= 0, got {tolerance}")
    mask = l_curve.grid >= informative_from
    if not mask.any():
        return InteractionVerdict.REPULSIVE
    dev = l_curve.values[mask] - l_curve.grid[mask]
    not_below = bool(np.all(dev >= -tolerance))
    not_above = bool(np.all(dev <= tolerance))
    if not_below and not_above:
        not_below, not_above = bool(np.all(dev >= 0)), bool(np.all(dev <= 0))
    if not_below:
        return InteractionVerdict.CLUSTERED
    if not_above:
        return InteractionVerdict.REPULSIVE
    return InteractionVerdict.NEITHER


def _verdict(pattern: PointPattern, grid: np.ndarray, tolerance_se: float) -> InteractionVerdict:
    tolerance = tolerance_se * l_standard_error(pattern.n, pattern.window.area())
    return verdict_from_l(l_from_k(k_function(pattern, grid)), min_pair_distance(pattern), tolerance)


def classify_pattern(pattern: PointPattern, interval_max: float = C.CLASSIFY_INTERVAL_MAX,
                     n_grid: int = C.CLASSIFY_GRID_SIZE,
                     tolerance_se: float = C.CLASSIFY_TOLERANCE_SE) -> InteractionVerdict:
    """
    Clustered / Repulsive / Neither from L over (0, interval_max]. Deviations from
    the diagonal smaller than ``tolerance_se`` Poisson standard errors do not count
    against a verdict; ``tolerance_se=0`` is the strict rule.
    """
    if pattern.n < 2:
        raise DataError(f"Classification needs at least 2 points, pattern has {pattern.n}")
    return _verdict(pattern, classify_grid(interval_max, n_grid), tolerance_se)


# --- survey ------------------------------------------------------------------

@dataclass(frozen=True)
class SurveyResult:
    clustered_fraction: float
    repulsive_fraction: float
    neither_fraction: float
    n_classified: int
    n_requested: int
    attempts: int

    @property
    def complete(self) -> bool:
        return self.n_classified >= self.n_requested

    def to_dict(self) -> dict:
        return {
            "clustered_fraction": self.clustered_fraction,
            "repulsive_fraction": self.repulsive_fraction,
            "neither_fraction": self.neither_fraction,
            "n_classified": self.n_classified,
            "n_requested": self.n_requested,
            "attempts": self.attempts,
            "complete": self.complete,
        }


def default_side_range(pattern: PointPattern, count_range: Tuple[int, int]) -> Tuple[float, float]:
    """Sides whose expected counts at the field intensity straddle ``count_range``."""
    lam = pattern.intensity()
    cap = min(pattern.window.width, pattern.window.height)
    lo = min(math.sqrt(count_range[0] / lam), cap)
    hi = min(math.sqrt(count_range[1] / lam), cap)
    return lo, hi


def survey_subregions(pattern: PointPattern, n_subregions: int = 1000,
                      count_range: Tuple[int, int] = C.SURVEY_COUNT_RANGE,
                      side_range: Optional[Tuple[float, float]] = None,
                      interval_max: float = C.CLASSIFY_INTERVAL_MAX,
                      tolerance_se: float = C.CLASSIFY_TOLERANCE_SE,
                      seed: int = 0,
                      retry_factor: int = C.SURVEY_RETRY_FACTOR) -> SurveyResult:
    """
    Classify random square sub-windows holding ``count_range`` points, each rescaled
    to the unit square. Returns a partial result (with a warning) when the attempt
    budget runs out first.
    """
    if pattern.n == 0:
        raise DataError("Cannot survey an empty pattern")
    if n_subregions < 1 or count_range[0] < 2 or count_range[1] < count_range[0]:
        raise ConfigError(f"Invalid survey ranges: n={n_subregions}, counts={count_range}")
    w = pattern.window
    side_range = side_range or default_side_range(pattern, count_range)
    if not 0 < side_range[0] <= side_range[1] <= min(w.width, w.height):
        raise ConfigError(f"Side range {side_range} must be positive and fit inside the window")

    rng = make_rng(seed)
    grid = classify_grid(interval_max)
    counts = {v: 0 for v in InteractionVerdict}
    classified = 0
    attempts = 0
    budget = retry_factor * n_subregions

    while classified < n_subregions and attempts < budget:
        attempts += 1
        side = rng.uniform(*side_range)
        x0 = rng.uniform(w.x_min, w.x_max - side)
        y0 = rng.uniform(w.y_min, w.y_max - side)
        sub = pattern.subset(Window(x0, x0 + side, y0, y0 + side))
        if not count_range[0] <= sub.n <= count_range[1]:
            continue
        verdict = _verdict(rescale_to_unit(sub), grid, tolerance_se)
        counts[verdict] += 1
        classified += 1

    if classified < n_subregions:
        logger.warning("Survey found %d/%d valid subregions in %d attempts", classified, n_subregions, attempts)
    frac = (lambda v: counts[v] / classified) if classified else (lambda v: math.nan)
    return SurveyResult(
        clustered_fraction=frac(InteractionVerdict.CLUSTERED),
        repulsive_fraction=frac(InteractionVerdict.REPULSIVE),
        neither_fraction=frac(InteractionVerdict.NEITHER),
        n_classified=classified,
        n_requested=n_subregions,
        attempts=attempts,
    )


# --- pre-judgement helpers ---------------------------------------------------

def estimate_hardcore(pattern: PointPattern) -> float:
    """Hard-core distance estimate: smallest NN distance * n/(n+1)."""
    if pattern.n < 2:
        raise DataError("Hard-core estimate needs at least 2 points")
    return float(np.min(nn_distances(pattern))) * pattern.n / (pattern.n + 1)


def prejudge(pattern: PointPattern, g_grid: Sequence[float], k_grid: Sequence[float]) -> pd.DataFrame:
    """G and K of the pattern next to their Poisson references, long format."""
    g = g_function(pattern, g_grid)
    k = k_function(pattern, k_grid)
    frames = []
    for curve in (g, k):
        df = curve.to_frame()
        df.insert(0, "statistic", curve.kind)
        frames.append(df)
    return pd.concat(frames, ignore_index=True)
