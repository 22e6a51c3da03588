"""
Poisson and Gibbs model fitting.

Gibbs families are fitted by maximum pseudolikelihood through the Berman-Turner
device: with lambda(u|x) = exp(theta . s(u)), the log pseudolikelihood

    sum_data log lambda(x_i | x - x_i) - sum_j w_j lambda(u_j | x)

is a weighted Poisson log-likelihood in theta = (log beta, log gamma), maximized
here by Newton iterations with step halving. Irregular parameters (r, h_c, sat)
are fixed per fit and searched by ``fit_profile``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Type, Union

import numpy as np
from scipy.spatial import cKDTree

from src.fitting.quadrature import QuadratureScheme, build_quadrature
from src.models.pattern import PointPattern, nn_distances
from src.models.processes import (
    FittedModel,
    GeyerSaturation,
    ModelSpec,
    Poisson,
    PoissonHardCore,
    Strauss,
    StraussHardCore,
    family_class,
)
from src.utils.constants import DIST_RTOL, NEWTON_GRAD_TOL, NEWTON_MAX_ITER
from src.utils.errors import ConfigError, ConvergenceError, InfeasibleFitError, UnsupportedFamilyError

logger = logging.getLogger(__name__)

GEYER_GAMMA_FLOOR = 1e-8

FamilyLike = Union[str, Type[ModelSpec]]


def _resolve(family: FamilyLike) -> Type[ModelSpec]:
    return family_class(family) if isinstance(family, str) else family


# --- poisson -----------------------------------------------------------------

def fit_poisson(pattern: PointPattern) -> FittedModel:
    """lambda = N / area."""
    lam = pattern.intensity()
    diagnostics: Dict[str, Any] = {"method": "closed_form", "n_points": pattern.n, "degenerate": pattern.n == 0}
    if pattern.n == 0:
        logger.warning("Fitting a Poisson model to an empty pattern: lambda = 0")
    return FittedModel(Poisson(lam), pattern.window, diagnostics)


# --- sufficient statistics on the quadrature ---------------------------------

@dataclass(frozen=True, eq=False)
class Regressors:
    """Interaction statistic and feasibility for every quadrature point."""

    stat: Optional[np.ndarray]
    feasible: np.ndarray


def _neighbour_lists(tree: cKDTree, query: np.ndarray, r: float):
    return tree.query_ball_point(query, r * (1.0 + DIST_RTOL))


def _geyer_stat(quad: QuadratureScheme, tree: cKDTree, r: float, sat: int) -> np.ndarray:
    data = quad.data.coords
    n = len(data)
    data_nbrs = _neighbour_lists(tree, data, r)
    t = np.array([len(nb) - 1 for nb in data_nbrs])
    # gain of neighbour j when a point joins: with x_j's count t_j (dummy) or t_j - 1 (data)
    gain_dummy = np.minimum(sat, t + 1) - np.minimum(sat, t)
    gain_data = np.minimum(sat, t) - np.minimum(sat, t - 1)

    stat = np.empty(n + len(quad.dummy))
    for i, nb in enumerate(data_nbrs):
        others = [j for j in nb if j != i]
        stat[i] = min(sat, len(others)) + gain_data[others].sum()
    for k, nb in enumerate(_neighbour_lists(tree, quad.dummy, r)):
        stat[n + k] = min(sat, len(nb)) + gain_dummy[nb].sum()
    return 0.5 * stat


def quadrature_regressors(family: Type[ModelSpec], quad: QuadratureScheme, irregulars: Dict[str, Any]) -> Regressors:
    data = quad.data.coords
    n = len(data)
    m = n + len(quad.dummy)
    feasible = np.ones(m, dtype=bool)
    if n == 0:
        return Regressors(None if family in (Poisson, PoissonHardCore) else np.zeros(m), feasible)
    tree = cKDTree(data)

    if family in (PoissonHardCore, StraussHardCore):
        h_c = irregulars["h_c"]
        if n >= 2:
            feasible[:n] = nn_distances(quad.data) >= h_c
        feasible[n:] = tree.query(quad.dummy)[0] >= h_c

    if family in (Poisson, PoissonHardCore):
        return Regressors(None, feasible)
    if family in (Strauss, StraussHardCore):
        r = irregulars["r"]
        rr = r * (1.0 + DIST_RTOL)
        t_data = np.asarray(tree.query_ball_point(data, rr, return_length=True)) - 1
        t_dummy = np.asarray(tree.query_ball_point(quad.dummy, rr, return_length=True))
        return Regressors(np.concatenate([t_data, t_dummy]).astype(float), feasible)
    if family is GeyerSaturation:
        return Regressors(_geyer_stat(quad, tree, irregulars["r"], int(irregulars["sat"])), feasible)
    raise UnsupportedFamilyError(f"No pseudolikelihood for {family.family}")


def log_pseudolikelihood(spec: ModelSpec, quad: QuadratureScheme) -> float:
    """Berman-Turner log pseudolikelihood of a fully specified model on ``quad``."""
    cls = type(spec)
    irregulars = {name: getattr(spec, name) for name in cls.irregular}
    reg = quadrature_regressors(cls, quad, irregulars)
    beta = spec.lam if isinstance(spec, Poisson) else spec.beta
    lam = np.full(len(quad.weights), beta, dtype=float)
    if reg.stat is not None:
        gamma = spec.gamma
        with np.errstate(divide="ignore"):
            lam = lam * np.where(reg.stat == 0, 1.0, np.power(gamma, reg.stat))
    lam = np.where(reg.feasible, lam, 0.0)
    data_lam = lam[: quad.n_data]
    if np.any(data_lam <= 0):
        return -math.inf
    return float(np.sum(np.log(data_lam)) - np.sum(quad.weights * lam))


# --- newton solver -----------------------------------------------------------

def _objective(theta, S, w, is_data):
    eta = S @ theta
    return float(np.sum(eta[is_data]) - np.sum(w * np.exp(eta)))


def newton_loglinear(S: np.ndarray, w: np.ndarray, is_data: np.ndarray, theta0: np.ndarray,
                     max_iter: int = NEWTON_MAX_ITER, tol: float = NEWTON_GRAD_TOL) -> Tuple[np.ndarray, float, int]:
    """
    Maximize sum_data S theta - sum_j w_j exp(S_j theta). Returns (theta, objective,
    iterations); raises ConvergenceError carrying the last iterate.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    n_data = int(is_data.sum())
    score_data = S[is_data].sum(axis=0)
    value = _objective(theta, S, w, is_data)
    for it in range(1, max_iter + 1):
        mu = w * np.exp(S @ theta)
        grad = score_data - S.T @ mu
        if np.max(np.abs(grad)) <= tol * max(1.0, n_data):
            return theta, value, it - 1
        hess = (S * mu[:, None]).T @ S
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            cand_value = _objective(cand, S, w, is_data)
            if np.isfinite(cand_value) and cand_value >= value - 1e-12 * abs(value):
                break
            t *= 0.5
        else:
            raise ConvergenceError("Step halving failed to improve the pseudolikelihood", last_iterate=theta)
        theta, value = cand, cand_value
    raise ConvergenceError(f"Newton iterations exceeded budget of {max_iter}", last_iterate=theta)


# --- maximum pseudolikelihood ------------------------------------------------

def _build_spec(family: Type[ModelSpec], beta: float, gamma: Optional[float], irregulars: Dict[str, Any]) -> ModelSpec:
    if family is Poisson:
        return Poisson(beta)
    if family is PoissonHardCore:
        return PoissonHardCore(beta, irregulars["h_c"])
    if family is Strauss:
        return Strauss(beta, gamma, irregulars["r"])
    if family is StraussHardCore:
        return StraussHardCore(beta, gamma, irregulars["r"], irregulars["h_c"])
    if family is GeyerSaturation:
        return GeyerSaturation(beta, gamma, irregulars["r"], int(irregulars["sat"]))
    raise UnsupportedFamilyError(f"No pseudolikelihood for {family.family}")


def fit_mpl(pattern: PointPattern, family: FamilyLike, fixed_irregulars: Optional[Dict[str, Any]] = None,
            quad: Optional[QuadratureScheme] = None) -> FittedModel:
    """
    Maximum pseudolikelihood estimate of (beta, gamma) with the irregular parameters
    held fixed. ``family="poisson"`` fits the intercept only.
    """
    family = _resolve(family)
    if not (family.gibbs or family is Poisson):
        raise UnsupportedFamilyError(f"{family.family} is not fitted by pseudolikelihood")
    irregulars = dict(fixed_irregulars or {})
    missing = [p for p in family.irregular if p not in irregulars]
    if missing:
        raise ConfigError(f"{family.family} needs fixed irregular parameter(s) {missing}")
    if pattern.n == 0:
        raise InfeasibleFitError("Cannot fit a pseudolikelihood model to an empty pattern")
    # validate irregulars before any heavy work
    _build_spec(family, 1.0, 0.5 if family is not GeyerSaturation else 1.0, irregulars)

    quad = quad or build_quadrature(pattern)
    if quad.data is not pattern and not np.array_equal(quad.data.coords, pattern.coords):
        raise ConfigError("Quadrature scheme was built for a different pattern")
    reg = quadrature_regressors(family, quad, irregulars)
    is_data = quad.is_data
    if not reg.feasible[is_data].all():
        raise InfeasibleFitError(
            f"Data violate the hard core h_c={irregulars.get('h_c')}: "
            f"{int((~reg.feasible[is_data]).sum())} point(s) too close"
        )

    rows = reg.feasible
    w = quad.weights[rows]
    data_rows = is_data[rows]
    n = pattern.n
    diagnostics: Dict[str, Any] = {
        "method": "maximum_pseudolikelihood",
        "n_points": n,
        "n_quadrature": int(len(quad.weights)),
        "dummy_grid": int(quad.n_side),
        "irregular": {k: irregulars[k] for k in family.irregular},
    }

    def intercept_only(mask: np.ndarray) -> Tuple[float, float]:
        # closed form: beta = N / sum of weights on admissible points
        total = float(w[mask].sum())
        return n / total, total

    gamma: Optional[float] = None
    if reg.stat is None:
        beta, _ = intercept_only(np.ones(len(w), dtype=bool))
        diagnostics["iterations"] = 0
    else:
        s = reg.stat[rows]
        s_data = float(s[data_rows].sum())
        if np.all(s == s[0]):
            # constant statistic (e.g. sat = 0): gamma has no effect on the fit
            beta, _ = intercept_only(np.ones(len(w), dtype=bool))
            gamma = 1.0
            diagnostics.update(iterations=0, boundary="interaction unidentifiable")
        elif s_data == 0:
            # no interacting data pairs: the estimate sits on gamma = 0
            beta, _ = intercept_only(s == 0)
            gamma = GEYER_GAMMA_FLOOR if family is GeyerSaturation else 0.0
            diagnostics.update(iterations=0, boundary="gamma=0")
        else:
            S = np.column_stack([np.ones(len(w)), s])
            theta0 = np.array([math.log(n / w.sum()), 0.0])
            theta, _, iters = newton_loglinear(S, w, data_rows, theta0)
            beta, gamma = math.exp(theta[0]), math.exp(theta[1])
            diagnostics["iterations"] = iters
            diagnostics["raw_gamma"] = gamma
            if family in (Strauss, StraussHardCore) and gamma > 1.0:
                logger.warning("%s gamma estimate %.4f exceeds 1; constrained to gamma = 1", family.family, gamma)
                beta, _ = intercept_only(np.ones(len(w), dtype=bool))
                gamma = 1.0
                diagnostics["boundary"] = "gamma=1"

    spec = _build_spec(family, beta, gamma, irregulars)
    diagnostics["log_pl"] = log_pseudolikelihood(spec, quad)
    logger.info("MPL fit %s: log PL %.4f", spec.describe(), diagnostics["log_pl"])
    return FittedModel(spec, pattern.window, diagnostics)


# --- profile search over irregular parameters --------------------------------

@dataclass(frozen=True)
class ProfileGrid:
    r: Tuple[float, ...] = ()
    h_c: Tuple[float, ...] = ()
    sat: Tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("r", "h_c", "sat"):
            values = tuple(getattr(self, name))
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"Profile grid for {name} must be strictly ascending, got {values}")
            object.__setattr__(self, name, values)

    def combinations(self, family: Type[ModelSpec]):
        """Irregular-parameter dicts ordered by (r, sat, h_c) so the first maximum wins ties."""
        names = [p for p in ("r", "sat", "h_c") if p in family.irregular]
        for p in names:
            if not getattr(self, p):
                raise ConfigError(f"Profile grid for {family.family} needs values for '{p}'")
        for combo in itertools.product(*(getattr(self, p) for p in names)):
            yield dict(zip(names, combo))


def fit_profile(pattern: PointPattern, family: FamilyLike, grid: ProfileGrid,
                quad: Optional[QuadratureScheme] = None) -> FittedModel:
    """Profile maximum pseudolikelihood: best fit_mpl over the irregular grid."""
    family = _resolve(family)
    quad = quad or build_quadrature(pattern)
    best: Optional[FittedModel] = None
    table = []
    failures: Dict[str, str] = {}

    for combo in grid.combinations(family):
        key = ", ".join(f"{k}={v}" for k, v in combo.items())
        try:
            fitted = fit_mpl(pattern, family, combo, quad)
        except (ConfigError, InfeasibleFitError, ConvergenceError) as exc:
            failures[key] = str(exc)
            logger.debug("Profile point %s failed: %s", key, exc)
            continue
        table.append({**combo, "log_pl": fitted.log_pl})
        if best is None or fitted.log_pl > best.log_pl:
            best = fitted

    if best is None:
        raise InfeasibleFitError(f"All {len(failures)} profile grid points failed for {family.family}", failures)

    diagnostics = dict(best.diagnostics)
    diagnostics.update(
        method="profile_maximum_pseudolikelihood",
        grids={"r": list(grid.r), "h_c": list(grid.h_c), "sat": list(grid.sat)},
        profile=table,
        failures=failures,
    )
    logger.info("Profile fit selected %s", best.spec.describe())
    return FittedModel(best.spec, best.fit_window, diagnostics)
