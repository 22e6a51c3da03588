"""Berman-Turner quadrature schemes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.models.pattern import PointPattern
from src.utils.constants import DUMMY_GRID_FACTOR
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuadratureScheme:
    """
    Data points followed by dummy points, with counting-measure weights.
    ``weights[:n_data]`` belong to the data points.
    """

    data: PointPattern
    dummy: np.ndarray
    weights: np.ndarray
    n_side: int

    @property
    def n_data(self) -> int:
        return self.data.n

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.data.coords, self.dummy])

    @property
    def is_data(self) -> np.ndarray:
        flags = np.zeros(len(self.weights), dtype=bool)
        flags[: self.n_data] = True
        return flags

    def total_weight(self) -> float:
        return float(self.weights.sum())


def default_grid_side(n_points: int) -> int:
    return DUMMY_GRID_FACTOR * max(1, math.ceil(math.sqrt(max(n_points, 1))))


def build_quadrature(pattern: PointPattern, n_side: Optional[int] = None) -> QuadratureScheme:
    """
    Dummy points at the centres of an n_side x n_side tiling; every point in a tile
    gets weight tile_area / (points in tile), so weights sum to the window area.
    """
    n_side = n_side or default_grid_side(pattern.n)
    if n_side < 1:
        raise ConfigError(f"Dummy grid side must be >= 1, got {n_side}")
    w = pattern.window
    dx, dy = w.width / n_side, w.height / n_side
    cx = w.x_min + dx * (np.arange(n_side) + 0.5)
    cy = w.y_min + dy * (np.arange(n_side) + 0.5)
    gx, gy = np.meshgrid(cx, cy)
    dummy = np.column_stack([gx.ravel(), gy.ravel()])

    # tile of each data point; boundary points fold into the last tile
    ix = np.clip(((pattern.coords[:, 0] - w.x_min) / dx).astype(int), 0, n_side - 1)
    iy = np.clip(((pattern.coords[:, 1] - w.y_min) / dy).astype(int), 0, n_side - 1)
    tile_data = iy * n_side + ix
    per_tile = 1 + np.bincount(tile_data, minlength=n_side * n_side)
    tile_area = dx * dy

    weights = np.concatenate([tile_area / per_tile[tile_data], tile_area / per_tile])
    logger.debug("Quadrature: %d data + %d dummy points", pattern.n, len(dummy))
    return QuadratureScheme(pattern, dummy, weights, n_side)
