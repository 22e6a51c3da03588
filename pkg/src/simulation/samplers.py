"""
Realizations of every process family on a rectangular window.

Poisson and Matérn cluster patterns are drawn exactly; Gibbs families use a
birth/death/shift Metropolis-Hastings chain driven by the conditional intensity.
"""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.models.config import McmcConfig
from src.models.pattern import PointPattern, Window
from src.models.processes import (
    GeyerSaturation,
    MaternCluster,
    ModelSpec,
    Poisson,
    PoissonHardCore,
    Strauss,
    StraussHardCore,
)
from src.utils.constants import DIST_RTOL
from src.utils.errors import ConfigError, UnsupportedFamilyError
from src.utils.rng import make_rng

logger = logging.getLogger(__name__)


def sample_poisson(lam: float, window: Window, seed: int) -> PointPattern:
    """Homogeneous Poisson pattern: Poisson(lam * area) uniform points."""
    if lam < 0:
        raise ConfigError(f"Intensity must be >= 0, got {lam}")
    rng = make_rng(seed)
    n = int(rng.poisson(lam * window.area()))
    return PointPattern(window.uniform(rng, n), window)


@dataclass(frozen=True)
class ClusterState:
    """Un-clipped internals of one Matérn cluster draw."""

    parents: np.ndarray
    daughters: np.ndarray
    parent_index: np.ndarray


def matern_cluster_state(kappa: float, r: float, mu: float, window: Window, rng: np.random.Generator) -> ClusterState:
    # parents live on the dilated window so edge clusters are complete
    outer = window.dilate(r)
    n_parents = int(rng.poisson(kappa * outer.area()))
    parents = outer.uniform(rng, n_parents)
    sizes = rng.poisson(mu, size=n_parents)
    parent_index = np.repeat(np.arange(n_parents), sizes)
    total = int(sizes.sum())
    rad = r * np.sqrt(rng.uniform(size=total))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=total)
    daughters = parents[parent_index] + np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
    return ClusterState(parents, daughters.reshape(-1, 2), parent_index)


def sample_matern_cluster(kappa: float, r: float, mu: float, window: Window, seed: int) -> PointPattern:
    """Daughters of a Matérn cluster process clipped to the window; parents are not returned."""
    if kappa < 0 or mu < 0:
        raise ConfigError(f"kappa and mu must be >= 0, got kappa={kappa}, mu={mu}")
    if r <= 0:
        raise ConfigError(f"Cluster radius must be > 0, got {r}")
    state = matern_cluster_state(kappa, r, mu, window, make_rng(seed))
    inside = window.contains(state.daughters) if len(state.daughters) else np.zeros(0, dtype=bool)
    return PointPattern(state.daughters[inside], window)


# --- gibbs sampler -----------------------------------------------------------

class ChainState:
    """
    MCMC state indexed by square cells of side ``radius``: every point within
    ``radius`` of a location lies in the 3x3 block of cells around it.
    """

    def __init__(self, window: Window, radius: float, xy: Optional[np.ndarray] = None):
        if radius <= 0:
            raise ConfigError(f"Cell radius must be > 0, got {radius}")
        self.window = window
        self.radius = radius
        self.side = radius * (1.0 + DIST_RTOL)
        self.xs: List[float] = []
        self.ys: List[float] = []
        self._cell_of: List[Tuple[int, int]] = []
        self._cells: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for x, y in (xy if xy is not None else ()):
            self.add(float(x), float(y))

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.xs, self.ys]) if self.xs else np.zeros((0, 2))

    def _cell(self, x: float, y: float) -> Tuple[int, int]:
        return int((x - self.window.x_min) // self.side), int((y - self.window.y_min) // self.side)

    def add(self, x: float, y: float) -> None:
        cell = self._cell(x, y)
        self._cells[cell].append(self.n)
        self._cell_of.append(cell)
        self.xs.append(x)
        self.ys.append(y)

    def remove(self, i: int) -> None:
        # swap with last; point order is irrelevant to the chain
        last = self.n - 1
        self._cells[self._cell_of[i]].remove(i)
        if i != last:
            members = self._cells[self._cell_of[last]]
            members[members.index(last)] = i
            self.xs[i], self.ys[i], self._cell_of[i] = self.xs[last], self.ys[last], self._cell_of[last]
        self.xs.pop()
        self.ys.pop()
        self._cell_of.pop()

    def move(self, i: int, x: float, y: float) -> None:
        self._cells[self._cell_of[i]].remove(i)
        cell = self._cell(x, y)
        self._cells[cell].append(i)
        self._cell_of[i] = cell
        self.xs[i] = x
        self.ys[i] = y

    def neighbours(self, x: float, y: float, exclude: Optional[int] = None) -> List[Tuple[int, float]]:
        """(index, squared distance) of points within ``radius`` of (x, y)."""
        cx, cy = self._cell(x, y)
        limit = self.side * self.side
        out = []
        for gx in (cx - 1, cx, cx + 1):
            for gy in (cy - 1, cy, cy + 1):
                for j in self._cells.get((gx, gy), ()):
                    if j == exclude:
                        continue
                    dx = self.xs[j] - x
                    dy = self.ys[j] - y
                    d2 = dx * dx + dy * dy
                    if d2 <= limit:
                        out.append((j, d2))
        return out

    def conditional_intensity(self, spec: ModelSpec, x: float, y: float, exclude: Optional[int] = None) -> float:
        """lambda((x, y) | state), leaving out point ``exclude``; agrees with ``papangelou_xy``."""
        if isinstance(spec, Poisson):
            return spec.lam
        nbrs = self.neighbours(x, y, exclude)
        if isinstance(spec, (PoissonHardCore, StraussHardCore)):
            h2 = spec.h_c * spec.h_c
            if any(d2 < h2 for _, d2 in nbrs):
                return 0.0
        if isinstance(spec, PoissonHardCore):
            return spec.beta
        r2 = (spec.r * (1.0 + DIST_RTOL)) ** 2
        close = [j for j, d2 in nbrs if d2 <= r2]
        if isinstance(spec, (Strauss, StraussHardCore)):
            return spec.beta * _gamma_power(spec.gamma, len(close))
        if isinstance(spec, GeyerSaturation):
            sat = spec.sat
            gain = 0
            for j in close:
                t = sum(1 for k, d2 in self.neighbours(self.xs[j], self.ys[j], exclude) if k != j and d2 <= r2)
                gain += min(sat, t + 1) - min(sat, t)
            return spec.beta * _gamma_power(spec.gamma, 0.5 * (min(sat, len(close)) + gain))
        raise UnsupportedFamilyError(f"No conditional intensity for {spec.family}")


def _gamma_power(gamma: float, k: float) -> float:
    return 1.0 if k == 0 else gamma ** k


def interaction_radius(spec: ModelSpec) -> float:
    """Largest distance at which two points of ``spec`` interact."""
    return max(getattr(spec, "r", 0.0), getattr(spec, "h_c", 0.0))


def sample_gibbs(spec: ModelSpec, window: Window, config: Optional[McmcConfig] = None, seed: int = 0) -> PointPattern:
    """
    State of a birth/death/shift Metropolis-Hastings chain after ``config.n_steps``.

    Birth proposes a uniform point, death removes a uniformly chosen point, shift
    moves a uniformly chosen point to a uniform location.
    """
    if isinstance(spec, (Poisson, MaternCluster)) or not spec.gibbs:
        raise UnsupportedFamilyError(
            f"{spec.family} is sampled exactly; use sample_poisson / sample_matern_cluster instead"
        )
    config = config or McmcConfig()
    rng = make_rng(seed)
    area = window.area()
    state = ChainState(window, interaction_radius(spec))

    if config.initial_state == "poisson":
        n0 = int(rng.poisson(spec.beta * area))
        for x, y in window.uniform(rng, n0):
            # sequential thinning keeps the start free of hard-core violations
            if state.conditional_intensity(spec, float(x), float(y)) > 0:
                state.add(float(x), float(y))

    steps = config.n_steps
    move = rng.uniform(size=steps).tolist()
    accept_u = rng.uniform(size=steps).tolist()
    pick = rng.uniform(size=steps).tolist()
    px = rng.uniform(window.x_min, window.x_max, size=steps).tolist()
    py = rng.uniform(window.y_min, window.y_max, size=steps).tolist()
    p_birth = config.p_birth
    p_birth_death = config.p_birth + config.p_death
    birth_ratio = config.p_death / config.p_birth if config.p_birth > 0 else 0.0
    death_ratio = config.p_birth / config.p_death if config.p_death > 0 else 0.0
    accepted = 0

    for step in range(steps):
        m = move[step]
        if m < p_birth:
            lam = state.conditional_intensity(spec, px[step], py[step])
            if accept_u[step] < lam * area / (state.n + 1) * birth_ratio:
                state.add(px[step], py[step])
                accepted += 1
            continue
        n = state.n
        if n == 0:
            continue
        i = min(int(pick[step] * n), n - 1)
        lam_old = state.conditional_intensity(spec, state.xs[i], state.ys[i], exclude=i)
        if m < p_birth_death:
            ratio = math.inf if lam_old == 0 else n / (area * lam_old) * death_ratio
            if accept_u[step] < ratio:
                state.remove(i)
                accepted += 1
        else:
            lam_new = state.conditional_intensity(spec, px[step], py[step], exclude=i)
            ratio = math.inf if lam_old == 0 else lam_new / lam_old
            if accept_u[step] < ratio:
                state.move(i, px[step], py[step])
                accepted += 1

    logger.debug("%s chain: %d steps, acceptance %.3f, final n=%d",
                 spec.family, steps, accepted / max(steps, 1), state.n)
    return PointPattern(state.xy, window)


def simulate(spec: ModelSpec, window: Window, seed: int, mcmc: Optional[McmcConfig] = None) -> PointPattern:
    """Dispatch to the exact sampler when there is one, MCMC otherwise."""
    if isinstance(spec, Poisson):
        return sample_poisson(spec.lam, window, seed)
    if isinstance(spec, MaternCluster):
        return sample_matern_cluster(spec.kappa, spec.r, spec.mu, window, seed)
    return sample_gibbs(spec, window, mcmc, seed)
