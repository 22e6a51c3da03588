"""
Point-process families: declarative specs, unnormalized densities and
Papangelou conditional intensities.

The normalizing constant of a Gibbs density is never computed; every
consumer (MCMC acceptance ratios, pseudolikelihood) only needs ratios.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, ClassVar, Dict, Optional, Type

import numpy as np

from src.models.pattern import Point, PointPattern, Window, close_pair_count, min_pair_distance, within
from src.utils.constants import DIST_RTOL, PRESETS
from src.utils.errors import ConfigError, UnsupportedFamilyError

logger = logging.getLogger(__name__)


def _power(gamma: float, k: float) -> float:
    """gamma**k with the convention 0**0 == 1."""
    if k == 0:
        return 1.0
    return gamma ** k


def _log_power(gamma: float, k: float) -> float:
    if k == 0:
        return 0.0
    if gamma == 0:
        return -math.inf
    return k * math.log(gamma)


def _log(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


# --- specs -------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Base of the tagged union; ``family`` is the JSON tag."""

    family: ClassVar[str] = ""
    gibbs: ClassVar[bool] = False
    irregular: ClassVar[tuple] = ()

    def _check(self, ok: bool, message: str) -> None:
        if not ok:
            raise ConfigError(f"{type(self).__name__}: {message}")

    def params(self) -> Dict[str, Any]:
        return asdict(self)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"family": self.family}
        for name, value in self.params().items():
            data["lambda" if name == "lam" else name] = value
        return data

    def describe(self) -> str:
        parts = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params().items())
        return f"{self.family}({parts})"


@dataclass(frozen=True)
class Poisson(ModelSpec):
    lam: float

    family: ClassVar[str] = "poisson"

    def __post_init__(self):
        self._check(math.isfinite(self.lam) and self.lam >= 0, f"lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class Strauss(ModelSpec):
    beta: float
    gamma: float
    r: float

    family: ClassVar[str] = "strauss"
    gibbs: ClassVar[bool] = True
    irregular: ClassVar[tuple] = ("r",)

    def __post_init__(self):
        self._check(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        # gamma > 1 is non-integrable; the clustered regime belongs to Geyer
        self._check(0 <= self.gamma <= 1, f"gamma must lie in [0, 1], got {self.gamma}")
        self._check(self.r > 0, f"r must be > 0, got {self.r}")


@dataclass(frozen=True)
class StraussHardCore(ModelSpec):
    beta: float
    gamma: float
    r: float
    h_c: float

    family: ClassVar[str] = "strauss_hardcore"
    gibbs: ClassVar[bool] = True
    irregular: ClassVar[tuple] = ("r", "h_c")

    def __post_init__(self):
        self._check(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        self._check(0 <= self.gamma <= 1, f"gamma must lie in [0, 1], got {self.gamma}")
        self._check(0 < self.h_c < self.r, f"need 0 < h_c < r, got h_c={self.h_c}, r={self.r}")


@dataclass(frozen=True)
class PoissonHardCore(ModelSpec):
    beta: float
    h_c: float

    family: ClassVar[str] = "poisson_hardcore"
    gibbs: ClassVar[bool] = True
    irregular: ClassVar[tuple] = ("h_c",)

    def __post_init__(self):
        self._check(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        self._check(self.h_c > 0, f"h_c must be > 0, got {self.h_c}")


@dataclass(frozen=True)
class GeyerSaturation(ModelSpec):
    beta: float
    gamma: float
    r: float
    sat: int

    family: ClassVar[str] = "geyer"
    gibbs: ClassVar[bool] = True
    irregular: ClassVar[tuple] = ("r", "sat")

    def __post_init__(self):
        self._check(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        self._check(self.gamma > 0, f"gamma must be > 0, got {self.gamma}")
        self._check(self.r > 0, f"r must be > 0, got {self.r}")
        self._check(int(self.sat) == self.sat and self.sat >= 0, f"sat must be a nonnegative integer, got {self.sat}")
        object.__setattr__(self, "sat", int(self.sat))


@dataclass(frozen=True)
class MaternCluster(ModelSpec):
    kappa: float
    r: float
    mu: float

    family: ClassVar[str] = "matern_cluster"

    def __post_init__(self):
        self._check(self.kappa >= 0, f"kappa must be >= 0, got {self.kappa}")
        self._check(self.mu >= 0, f"mu must be >= 0, got {self.mu}")
        self._check(self.r > 0, f"r must be > 0, got {self.r}")


FAMILIES: Dict[str, Type[ModelSpec]] = {
    cls.family: cls
    for cls in (Poisson, Strauss, StraussHardCore, PoissonHardCore, GeyerSaturation, MaternCluster)
}

# short names accepted on the command line
FAMILY_ALIASES = {
    "ppp": "poisson",
    "sh": "strauss_hardcore",
    "phcp": "poisson_hardcore",
    "mcp": "matern_cluster",
    "matern": "matern_cluster",
}


def family_class(name: str) -> Type[ModelSpec]:
    key = FAMILY_ALIASES.get(name.lower(), name.lower())
    try:
        return FAMILIES[key]
    except KeyError:
        raise ConfigError(f"Unknown family '{name}'; expected one of {sorted(FAMILIES) + sorted(FAMILY_ALIASES)}") from None


def spec_from_dict(data: Dict[str, Any]) -> ModelSpec:
    """Inverse of ``ModelSpec.to_dict``."""
    if "family" not in data:
        raise ConfigError(f"Model JSON lacks a 'family' field: {data}")
    cls = family_class(str(data["family"]))
    kwargs = {}
    for f in fields(cls):
        key = "lambda" if f.name == "lam" else f.name
        if key not in data:
            raise ConfigError(f"Model JSON for {cls.family} lacks '{key}'")
        try:
            kwargs[f.name] = int(float(data[key])) if f.name == "sat" else float(data[key])
        except (TypeError, ValueError):
            raise ConfigError(f"Model field '{key}' must be numeric, got {data[key]!r}") from None
    return cls(**kwargs)


def preset(name: str) -> ModelSpec:
    try:
        return spec_from_dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"Unknown preset '{name}'; expected one of {sorted(PRESETS)}") from None


# --- fitted model ------------------------------------------------------------

@dataclass(frozen=True)
class FittedModel:
    """A spec plus where and how it was estimated."""

    spec: ModelSpec
    fit_window: Window
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def log_pl(self) -> Optional[float]:
        return self.diagnostics.get("log_pl")

    def to_dict(self) -> Dict[str, Any]:
        data = self.spec.to_dict()
        data["fit_window"] = self.fit_window.to_dict()
        data["diagnostics"] = self.diagnostics
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FittedModel":
        spec_part = {k: v for k, v in data.items() if k not in ("fit_window", "diagnostics")}
        return cls(spec_from_dict(spec_part), Window.from_dict(data["fit_window"]), dict(data.get("diagnostics", {})))


# --- conditional intensity and density ---------------------------------------

def _require_gibbs_or_poisson(spec: ModelSpec) -> None:
    if isinstance(spec, MaternCluster):
        raise UnsupportedFamilyError(
            "The Matern cluster process has no Gibbs-form density here; "
            "use the cluster sampler and minimum-contrast fitting instead"
        )


def geyer_delta(coords: np.ndarray, u: np.ndarray, r: float, sat: int, exclude: Optional[int] = None) -> float:
    """
    Change of the saturated-pair statistic S(x) = 1/2 * sum_i min(sat, t(x_i)) when u
    joins x. Includes the back-reaction on u's r-neighbours. Row ``exclude`` of
    ``coords`` is treated as absent.
    """
    coords = np.asarray(coords, dtype=float)
    if len(coords) == 0:
        return 0.0
    d = np.hypot(coords[:, 0] - u[0], coords[:, 1] - u[1])
    if exclude is not None:
        d[exclude] = np.inf
    nbrs = np.flatnonzero(within(d, r))
    if len(nbrs) == 0:
        return 0.0
    dn = np.hypot(coords[nbrs, 0, None] - coords[None, :, 0], coords[nbrs, 1, None] - coords[None, :, 1])
    if exclude is not None:
        dn[:, exclude] = np.inf
    # t_j excludes x_j itself
    t_nbrs = np.count_nonzero(within(dn, r), axis=1) - 1
    gain = np.minimum(sat, t_nbrs + 1) - np.minimum(sat, t_nbrs)
    return 0.5 * (min(sat, len(nbrs)) + float(gain.sum()))


def papangelou_xy(spec: ModelSpec, coords: np.ndarray, u: np.ndarray, exclude: Optional[int] = None) -> float:
    """
    Conditional intensity lambda(u | x) on raw coordinates. Row ``exclude`` is
    left out of x (used for deaths and shifts); x must not otherwise contain u.
    """
    _require_gibbs_or_poisson(spec)
    if isinstance(spec, Poisson):
        return spec.lam

    coords = np.asarray(coords, dtype=float)
    n_eff = len(coords) - (exclude is not None)
    if n_eff <= 0:
        return spec.beta
    d = np.hypot(coords[:, 0] - u[0], coords[:, 1] - u[1])
    if exclude is not None:
        d[exclude] = np.inf

    if isinstance(spec, (PoissonHardCore, StraussHardCore)) and np.any(d < spec.h_c):
        return 0.0
    if isinstance(spec, PoissonHardCore):
        return spec.beta
    if isinstance(spec, (Strauss, StraussHardCore)):
        t = int(np.count_nonzero(within(d, spec.r)))
        return spec.beta * _power(spec.gamma, t)
    if isinstance(spec, GeyerSaturation):
        return spec.beta * _power(spec.gamma, geyer_delta(coords, u, spec.r, spec.sat, exclude))
    raise UnsupportedFamilyError(f"No conditional intensity for {spec.family}")


def papangelou(spec: ModelSpec, pattern: PointPattern, u: Point) -> float:
    """lambda(u | x) = f(x + u) / f(x)."""
    return papangelou_xy(spec, pattern.coords, np.array([u.x, u.y]))


def geyer_statistic(pattern: PointPattern, r: float, sat: int) -> float:
    if pattern.n < 2:
        return 0.0
    t = np.asarray(pattern.tree.query_ball_point(pattern.coords, r * (1.0 + DIST_RTOL), return_length=True)) - 1
    return 0.5 * float(np.minimum(sat, t).sum())


def log_density_unnormalized(spec: ModelSpec, pattern: PointPattern) -> float:
    """log f(x) without the normalizing constant; -inf on hard-core violation."""
    _require_gibbs_or_poisson(spec)
    n = pattern.n
    if isinstance(spec, Poisson):
        return 0.0 if n == 0 else n * _log(spec.lam)

    base = 0.0 if n == 0 else n * _log(spec.beta)
    if isinstance(spec, (PoissonHardCore, StraussHardCore)) and min_pair_distance(pattern) < spec.h_c:
        return -math.inf
    if isinstance(spec, PoissonHardCore):
        return base
    if isinstance(spec, (Strauss, StraussHardCore)):
        return base + _log_power(spec.gamma, close_pair_count(pattern, spec.r))
    if isinstance(spec, GeyerSaturation):
        return base + _log_power(spec.gamma, geyer_statistic(pattern, spec.r, spec.sat))
    raise UnsupportedFamilyError(f"No density for {spec.family}")
