"""
Edge-corrected summary statistics (G, K, L) and kernel density maps.

G uses the reduced-sample (border) correction and K the translation
correction; both are exact on rectangular windows.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm

from src.models.pattern import PointPattern, Window, nn_distances, within
from src.utils.constants import DIST_RTOL
from src.utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

CURVE_KINDS = ("G", "K", "L", "coverage")


@dataclass(frozen=True, eq=False)
class SummaryCurve:
    """Statistic values on an ascending grid. Undefined values are NaN."""

    grid: np.ndarray
    values: np.ndarray
    kind: str
    warnings: Tuple[str, ...] = ()
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if self.kind not in CURVE_KINDS:
            raise ConfigError(f"Unknown curve kind '{self.kind}'")
        if grid.shape != values.shape or grid.ndim != 1:
            raise ConfigError("Curve grid and values must be 1-d and of equal length")
        if np.any(np.diff(grid) <= 0):
            raise ConfigError("Curve grid must be strictly ascending")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.reference is not None:
            object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float))

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"grid": self.grid, "value": self.values})
        if self.reference is not None:
            df["reference"] = self.reference
        return df

    def to_dict(self) -> Dict:
        data = {
            "kind": self.kind,
            "grid": self.grid.tolist(),
            "values": [None if not np.isfinite(v) else float(v) for v in self.values],
            "warnings": list(self.warnings),
        }
        if self.reference is not None:
            data["reference"] = self.reference.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "SummaryCurve":
        values = [np.nan if v is None else v for v in data["values"]]
        return cls(np.array(data["grid"]), np.array(values), data["kind"], tuple(data.get("warnings", ())),
                   None if data.get("reference") is None else np.array(data["reference"]))


def _check_grid(grid: Sequence[float], upper: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ConfigError("Distance grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("Distance grid must be strictly ascending")
    if grid[0] < 0 or grid[-1] > upper:
        raise ConfigError(f"Distance grid must lie within [0, {upper:.6g}]")
    return grid


def _require_points(pattern: PointPattern, k: int = 2) -> None:
    if pattern.n < k:
        raise DataError(f"Statistic needs at least {k} points, pattern has {pattern.n}")


# --- g, K, L -----------------------------------------------------------------

def g_function(pattern: PointPattern, grid: Sequence[float]) -> SummaryCurve:
    """Reduced-sample estimate of the nearest-neighbour distance distribution."""
    _require_points(pattern)
    grid = _check_grid(grid, pattern.window.diameter())
    nnd = nn_distances(pattern)
    border = pattern.window.border_distance(pattern.coords)

    retained = border[None, :] >= grid[:, None]
    hit = retained & within(nnd[None, :], grid[:, None])
    n_kept = retained.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(n_kept > 0, hit.sum(axis=1) / np.maximum(n_kept, 1), np.nan)
    warnings = ()
    if np.any(n_kept == 0):
        warnings = (f"G undefined for r >= {grid[n_kept == 0][0]:.6g}: no point retained by border correction",)
    return SummaryCurve(grid, values, "G", warnings, reference=g_poisson(pattern.intensity(), grid))


def _translation_pairs(pattern: PointPattern, rmax: float) -> Tuple[np.ndarray, np.ndarray]:
    """Distances and translation weights of unordered pairs within rmax."""
    w = pattern.window
    pairs = pattern.tree.query_pairs(rmax * (1.0 + DIST_RTOL), output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros(0), np.zeros(0)
    delta = pattern.coords[pairs[:, 0]] - pattern.coords[pairs[:, 1]]
    d = np.hypot(delta[:, 0], delta[:, 1])
    overlap = (w.width - np.abs(delta[:, 0])) * (w.height - np.abs(delta[:, 1]))
    return d, 1.0 / overlap


def k_function(pattern: PointPattern, grid: Sequence[float]) -> SummaryCurve:
    """
    Translation-corrected Ripley K with lambda^2 estimated as N(N-1)/|W|^2.
    Grids beyond a quarter of the shorter side are computed but flagged.
    """
    _require_points(pattern)
    w = pattern.window
    grid = _check_grid(grid, w.diameter())
    warnings = ()
    bound = 0.25 * min(w.width, w.height)
    if grid[-1] > bound * (1.0 + DIST_RTOL):
        msg = f"K grid max {grid[-1]:.6g} exceeds reliability bound {bound:.6g}"
        logger.warning(msg)
        warnings = (msg,)

    d, weight = _translation_pairs(pattern, float(grid[-1]))
    n = pattern.n
    order = np.argsort(d)
    cum = np.concatenate([[0.0], np.cumsum(weight[order])])
    idx = np.searchsorted(d[order], grid * (1.0 + DIST_RTOL), side="right")
    # each unordered pair counts twice in the sum over i != j
    values = w.area() ** 2 / (n * (n - 1)) * 2.0 * cum[idx]
    return SummaryCurve(grid, values, "K", warnings, reference=k_poisson(grid))


def l_function(pattern: PointPattern, grid: Sequence[float]) -> SummaryCurve:
    """L(r) = sqrt(K(r) / pi)."""
    k = k_function(pattern, grid)
    return l_from_k(k)


def l_from_k(k: SummaryCurve) -> SummaryCurve:
    return SummaryCurve(k.grid, np.sqrt(k.values / np.pi), "L", k.warnings, reference=k.grid.copy())


# Poisson references

def g_poisson(lam: float, grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return 1.0 - np.exp(-lam * np.pi * grid**2)


def k_poisson(grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return np.pi * grid**2


# --- kernel density ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityMap:
    """Intensity (points per unit area) on an ny x nx grid of cells."""

    window: Window
    values: np.ndarray
    bandwidth: float

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def cell_area(self) -> float:
        return self.window.area() / (self.nx * self.ny)

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        return _centers(self.window.x_min, self.window.x_max, self.nx), _centers(self.window.y_min, self.window.y_max, self.ny)

    def total_mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def to_frame(self) -> pd.DataFrame:
        cx, cy = self.cell_centers()
        xx, yy = np.meshgrid(cx, cy)
        return pd.DataFrame({"x": xx.ravel(), "y": yy.ravel(), "value": self.values.ravel()})


def _centers(lo: float, hi: float, n: int) -> np.ndarray:
    step = (hi - lo) / n
    return lo + step * (np.arange(n) + 0.5)


def scott_bandwidth(pattern: PointPattern) -> float:
    """Scott's rule in window units (isotropic): mean coordinate sd * n^(-1/6)."""
    w = pattern.window
    if pattern.n < 2:
        return 0.1 * min(w.width, w.height)
    sd = float(np.mean(np.std(pattern.coords, axis=0, ddof=1)))
    if sd <= 0:
        return 0.1 * min(w.width, w.height)
    return sd * pattern.n ** (-1.0 / 6.0)


def _axis_kernel(coord: np.ndarray, centers: np.ndarray, lo: float, hi: float, h: float) -> np.ndarray:
    """(n, m) reflected Gaussian weights per point, each row normalized to unit mass."""
    step = centers[1] - centers[0]
    k = (
        norm.pdf(centers[None, :], loc=coord[:, None], scale=h)
        + norm.pdf(centers[None, :], loc=(2 * lo - coord)[:, None], scale=h)
        + norm.pdf(centers[None, :], loc=(2 * hi - coord)[:, None], scale=h)
    )
    mass = k.sum(axis=1, keepdims=True) * step
    return k / np.where(mass > 0, mass, 1.0)


def kernel_density(pattern: PointPattern, bandwidth: Optional[float] = None, nx: int = 64, ny: int = 64) -> DensityMap:
    """
    Isotropic Gaussian kernel intensity at cell centres with reflection at the
    window edges. Each point's discretized kernel is rescaled to unit mass, so the
    map integrates to N(x).
    """
    if nx < 2 or ny < 2:
        raise ConfigError(f"Grid must be at least 2x2, got {nx}x{ny}")
    h = scott_bandwidth(pattern) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ConfigError(f"Bandwidth must be > 0, got {bandwidth}")
    w = pattern.window
    if pattern.n == 0:
        return DensityMap(w, np.zeros((ny, nx)), h)

    cx = _centers(w.x_min, w.x_max, nx)
    cy = _centers(w.y_min, w.y_max, ny)
    kx = _axis_kernel(pattern.coords[:, 0], cx, w.x_min, w.x_max, h)
    ky = _axis_kernel(pattern.coords[:, 1], cy, w.y_min, w.y_max, h)
    values = ky.T @ kx
    return DensityMap(w, values, h)
