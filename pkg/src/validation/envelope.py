"""
Pointwise Monte Carlo envelopes and the curve-in-envelope test.

The envelope at each grid point keeps the simulated values left after discarding
the ``nrank`` highest and ``nrank`` lowest, giving significance 2*nrank/(1+nsim).
The test is pointwise; applied over a whole grid its size exceeds alpha.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.analysis.summary import SummaryCurve, g_function, k_function, l_function
from src.models.config import ChannelConfig, McmcConfig, UserPlacement
from src.models.pattern import PointPattern, Window
from src.models.processes import FittedModel, ModelSpec
from src.radio.coverage import coverage_curve
from src.simulation.samplers import simulate
from src.utils.constants import ENVELOPE_MAX_UNDEFINED
from src.utils.errors import CellGeoError, ConfigError, EnvelopeError, GridMismatchError
from src.utils.rng import derive_seed

logger = logging.getLogger(__name__)


def envelope_alpha(nsim: int, nrank: int) -> float:
    return 2.0 * nrank / (1.0 + nsim)


@dataclass(frozen=True)
class Statistic:
    """
    A curve operation evaluated on simulated and observed patterns alike.
    Coverage needs a channel and placement; G, K and L ignore them.
    """

    kind: str
    channel: Optional[ChannelConfig] = None
    placement: Optional[UserPlacement] = None

    def __post_init__(self):
        if self.kind not in ("G", "K", "L", "coverage"):
            raise ConfigError(f"Unknown statistic '{self.kind}'; expected G, K, L or coverage")

    def evaluate(self, pattern: PointPattern, grid: Sequence[float], seed: int = 0) -> SummaryCurve:
        if self.kind == "G":
            return g_function(pattern, grid)
        if self.kind == "K":
            return k_function(pattern, grid)
        if self.kind == "L":
            return l_function(pattern, grid)
        return coverage_curve(pattern, grid, self.placement or UserPlacement(),
                              self.channel or ChannelConfig(), seed)


StatisticLike = Union[str, Statistic]


def _as_statistic(statistic: StatisticLike) -> Statistic:
    return statistic if isinstance(statistic, Statistic) else Statistic(str(statistic))


@dataclass(frozen=True, eq=False)
class Envelope:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    nsim: int
    nrank: int
    kind: str = "L"
    undefined_fraction: Optional[np.ndarray] = None

    @property
    def alpha(self) -> float:
        return envelope_alpha(self.nsim, self.nrank)

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def to_frame(self, observed: Optional[SummaryCurve] = None) -> pd.DataFrame:
        df = pd.DataFrame({"grid": self.grid, "lower": self.lower, "upper": self.upper})
        if observed is not None:
            _check_same_grid(observed, self)
            df["observed"] = observed.values
        return df

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "grid": self.grid.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "nsim": self.nsim,
            "nrank": self.nrank,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Envelope":
        return cls(np.array(data["grid"], dtype=float), np.array(data["lower"], dtype=float),
                   np.array(data["upper"], dtype=float), int(data["nsim"]), int(data["nrank"]),
                   data.get("kind", "L"))


def simulate_replicates(spec: ModelSpec, window: Window, nsim: int, seed: int,
                        mcmc: Optional[McmcConfig] = None) -> List[PointPattern]:
    """``nsim`` independent draws; replicate i is simulated from seed (seed, i, 0)."""
    return [simulate(spec, window, derive_seed(seed, i, 0), mcmc) for i in range(nsim)]


def evaluate_replicates(patterns: Sequence[PointPattern], statistic: StatisticLike, grid: Sequence[float],
                        seed: int) -> np.ndarray:
    """
    (len(patterns), len(grid)) statistic values; replicate i evaluates with seed
    (seed, i, 1). Failed evaluations are rows of NaN.
    """
    stat = _as_statistic(statistic)
    grid = np.asarray(grid, dtype=float)
    values = np.full((len(patterns), len(grid)), np.nan)
    for i, pattern in enumerate(patterns):
        try:
            values[i] = stat.evaluate(pattern, grid, derive_seed(seed, i, 1)).values
        except CellGeoError as exc:
            logger.debug("Replicate %d: %s undefined (%s)", i, stat.kind, exc)
    return values


def simulated_curves(spec: ModelSpec, window: Window, statistic: StatisticLike, grid: Sequence[float],
                     nsim: int, seed: int, mcmc: Optional[McmcConfig] = None) -> np.ndarray:
    """Statistic values of ``nsim`` fresh model draws, one row per replicate."""
    return evaluate_replicates(simulate_replicates(spec, window, nsim, seed, mcmc), statistic, grid, seed)


def envelope_from_values(values: np.ndarray, grid: Sequence[float], nrank: int, kind: str = "L") -> Envelope:
    """Rank-based bounds from precomputed simulated curves."""
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    nsim = values.shape[0]
    if nrank < 1 or nsim < 2 * nrank:
        raise ConfigError(f"Need nsim >= 2*nrank >= 2, got nsim={nsim}, nrank={nrank}")

    undefined = ~np.isfinite(values)
    frac = undefined.mean(axis=0)
    bad = frac > ENVELOPE_MAX_UNDEFINED
    if bad.any():
        raise EnvelopeError(
            f"{kind} undefined in more than {ENVELOPE_MAX_UNDEFINED:.0%} of simulations at r = "
            + ", ".join(f"{g:.6g}" for g in grid[bad]),
            grid_points=grid[bad].tolist(),
        )

    # NaN sorts last, so the defined values of each column come first
    ordered = np.sort(values, axis=0)
    n_def = nsim - undefined.sum(axis=0)
    top = n_def - 1 - nrank
    if np.any(top < nrank):
        raise EnvelopeError(f"Too few defined {kind} values left to discard {nrank} from each end",
                            grid_points=grid[top < nrank].tolist())
    cols = np.arange(len(grid))
    return Envelope(grid, ordered[nrank, cols], ordered[top, cols], nsim, nrank, kind, frac)


def build_envelope(model: Union[FittedModel, ModelSpec], statistic: StatisticLike, grid: Sequence[float],
                   nsim: int, nrank: int, seed: int, mcmc: Optional[McmcConfig] = None,
                   window: Optional[Window] = None,
                   patterns: Optional[Sequence[PointPattern]] = None) -> Envelope:
    """
    Simulate ``nsim`` patterns of the model on its fitting window and form the
    pointwise rank envelope of the statistic. Pass ``patterns`` to reuse draws
    from an earlier envelope; only their evaluation then depends on ``seed``.
    """
    if nrank < 1 or nsim < 2 * nrank:
        raise ConfigError(f"Need nsim >= 2*nrank >= 2, got nsim={nsim}, nrank={nrank}")
    if isinstance(model, FittedModel):
        spec, window = model.spec, window or model.fit_window
    else:
        spec, window = model, window or Window.unit()
    stat = _as_statistic(statistic)
    logger.info("Building %s envelope for %s: nsim=%d, nrank=%d (alpha=%.3g)",
                stat.kind, spec.describe(), nsim, nrank, envelope_alpha(nsim, nrank))
    if patterns is None:
        values = simulated_curves(spec, window, stat, grid, nsim, seed, mcmc)
    elif len(patterns) != nsim:
        raise ConfigError(f"Got {len(patterns)} simulated patterns for nsim={nsim}")
    else:
        values = evaluate_replicates(patterns, stat, grid, seed)
    return envelope_from_values(values, grid, nrank, stat.kind)


# --- test --------------------------------------------------------------------

@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    rejected: bool
    exceedance_intervals: Tuple[Tuple[float, float], ...]
    kind: str
    alpha: float = float("nan")
    model: Optional[str] = None
    extras: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = {
            "kind": self.kind,
            "rejected": self.rejected,
            "exceedance_intervals": [list(iv) for iv in self.exceedance_intervals],
            "alpha": self.alpha,
        }
        if self.model is not None:
            data["model"] = self.model
        data.update(self.extras)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "TestReport":
        known = {"kind", "rejected", "exceedance_intervals", "alpha", "model"}
        return cls(bool(data["rejected"]), tuple(tuple(iv) for iv in data["exceedance_intervals"]),
                   data["kind"], float(data.get("alpha", float("nan"))), data.get("model"),
                   {k: v for k, v in data.items() if k not in known})


def _check_same_grid(observed: SummaryCurve, envelope: Envelope) -> None:
    if observed.grid.shape != envelope.grid.shape or not np.allclose(observed.grid, envelope.grid, rtol=1e-12, atol=0):
        raise GridMismatchError("Observed curve and envelope are evaluated on different grids")


def _runs(flags: np.ndarray) -> List[Tuple[int, int]]:
    """Index ranges [start, end] of maximal runs of True."""
    padded = np.concatenate([[False], flags, [False]]).astype(int)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def test_curve(observed: SummaryCurve, envelope: Envelope, model: Optional[str] = None) -> TestReport:
    """Reject iff the observed curve leaves [lower, upper] at any grid point."""
    _check_same_grid(observed, envelope)
    v = observed.values
    outside = np.isfinite(v) & ((v < envelope.lower) | (v > envelope.upper))
    if np.any(~np.isfinite(v)):
        logger.warning("Observed %s undefined at %d grid points; treated as inside", observed.kind,
                       int(np.sum(~np.isfinite(v))))
    g = envelope.grid
    intervals = tuple((float(g[a]), float(g[b])) for a, b in _runs(outside))
    return TestReport(bool(intervals), intervals, observed.kind, envelope.alpha, model)


test_curve.__test__ = False
