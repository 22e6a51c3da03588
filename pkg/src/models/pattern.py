"""Planar points, rectangular observation windows and point patterns."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.utils.constants import DIST_RTOL
from src.utils.errors import DataError, DegenerateWindowError

logger = logging.getLogger(__name__)


def within(d: np.ndarray | float, r: float) -> np.ndarray | bool:
    """``d <= r`` with the package-wide relative tolerance."""
    return d <= r * (1.0 + DIST_RTOL)


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DataError(f"Point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle [x_min, x_max] x [y_min, y_max]."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        bounds = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(math.isfinite(b) for b in bounds):
            raise DataError(f"Window bounds must be finite, got {bounds}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DegenerateWindowError(
                f"Window has zero width or height: x=[{self.x_min}, {self.x_max}], "
                f"y=[{self.y_min}, {self.y_max}]"
            )

    @classmethod
    def unit(cls) -> "Window":
        return cls(0.0, 1.0, 0.0, 1.0)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return self.width * self.height

    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def dilate(self, r: float) -> "Window":
        return Window(self.x_min - r, self.x_max + r, self.y_min - r, self.y_max + r)

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Boundary-inclusive membership for an (n, 2) array."""
        xy = np.atleast_2d(xy)
        return (
            (xy[:, 0] >= self.x_min) & (xy[:, 0] <= self.x_max)
            & (xy[:, 1] >= self.y_min) & (xy[:, 1] <= self.y_max)
        )

    def border_distance(self, xy: np.ndarray) -> np.ndarray:
        """Distance from each point to the window boundary."""
        xy = np.atleast_2d(xy)
        return np.minimum.reduce([
            xy[:, 0] - self.x_min, self.x_max - xy[:, 0],
            xy[:, 1] - self.y_min, self.y_max - xy[:, 1],
        ])

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        xs = rng.uniform(self.x_min, self.x_max, size=n)
        ys = rng.uniform(self.y_min, self.y_max, size=n)
        return np.column_stack([xs, ys])

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, data: dict) -> "Window":
        return cls(float(data["x_min"]), float(data["x_max"]), float(data["y_min"]), float(data["y_max"]))


@dataclass(frozen=True, eq=False)
class PointPattern:
    """
    Ordered planar points observed in a window.

    Coordinates are stored as a read-only (n, 2) float array; ``points`` gives the
    same data as ``Point`` objects.
    """

    coords: np.ndarray
    window: Window
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        xy = np.asarray(self.coords, dtype=float).reshape(-1, 2).copy()
        if not np.all(np.isfinite(xy)):
            raise DataError("Point coordinates must be finite")
        outside = ~self.window.contains(xy) if len(xy) else np.zeros(0, dtype=bool)
        if outside.any():
            raise DataError(f"{int(outside.sum())} point(s) lie outside the window {self.window}")
        xy.setflags(write=False)
        object.__setattr__(self, "coords", xy)

    @classmethod
    def from_points(cls, points: Iterable[Point | Tuple[float, float]], window: Window) -> "PointPattern":
        xy = [(p.x, p.y) if isinstance(p, Point) else (float(p[0]), float(p[1])) for p in points]
        return cls(np.array(xy, dtype=float).reshape(-1, 2), window)

    @property
    def points(self) -> List[Point]:
        return [Point(float(x), float(y)) for x, y in self.coords]

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    def __len__(self) -> int:
        return self.n

    @property
    def tree(self) -> cKDTree:
        # cached per (immutable) pattern
        if self._tree is None:
            object.__setattr__(self, "_tree", cKDTree(self.coords))
        return self._tree

    def intensity(self) -> float:
        return self.n / self.window.area()

    def subset(self, window: Window) -> "PointPattern":
        return PointPattern(self.coords[window.contains(self.coords)], window)

    def __repr__(self) -> str:
        return f"PointPattern(n={self.n}, window={self.window})"


# --- operations --------------------------------------------------------------

def rescale_to_unit(pattern: PointPattern) -> PointPattern:
    """Map the pattern's window onto [0,1]^2, each axis scaled independently."""
    w = pattern.window
    if w == Window.unit():
        return pattern
    xy = np.column_stack([
        (pattern.coords[:, 0] - w.x_min) / w.width,
        (pattern.coords[:, 1] - w.y_min) / w.height,
    ])
    # float round-off must not push boundary points out
    xy = np.clip(xy, 0.0, 1.0)
    return PointPattern(xy, Window.unit())


def close_pairs(pattern: PointPattern, r: float) -> np.ndarray:
    """Index array (m, 2) of unordered pairs i<j with distance <= r."""
    if r < 0:
        raise DataError(f"Interaction distance must be nonnegative, got {r}")
    if pattern.n < 2:
        return np.zeros((0, 2), dtype=int)
    return pattern.tree.query_pairs(r * (1.0 + DIST_RTOL), output_type="ndarray")


def close_pair_count(pattern: PointPattern, r: float) -> int:
    """s(x): number of unordered pairs at distance <= r."""
    return int(len(close_pairs(pattern, r)))


def nn_distances(pattern: PointPattern) -> np.ndarray:
    """Distance from each point to its nearest other point, in point order."""
    if pattern.n < 2:
        raise DataError(f"Nearest-neighbour distances need at least 2 points, got {pattern.n}")
    dist, idx = pattern.tree.query(pattern.coords, k=2)
    # with coincident points the query may return the partner first; the nearest
    # *other* point is at distance 0 either way
    self_first = idx[:, 0] == np.arange(pattern.n)
    return np.where(self_first, dist[:, 1], dist[:, 0])


def min_pair_distance(pattern: PointPattern) -> float:
    if pattern.n < 2:
        return math.inf
    return float(np.min(nn_distances(pattern)))
