"""
Downlink SINR and coverage probability of a base-station pattern.

A user is served by its nearest base station; every other station in the window
interferes. Per-link gains are Exp(1) Rayleigh fading times lognormal shadowing
10^(X/10), X ~ N(0, sigma^2), each switchable.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from src.analysis.summary import SummaryCurve
from src.models.config import ChannelConfig, UserPlacement
from src.models.pattern import Point, PointPattern, Window
from src.utils.constants import USER_REDRAW_LIMIT
from src.utils.errors import ConfigError, DataError, SingularPathLossError
from src.utils.rng import make_rng

logger = logging.getLogger(__name__)


def db_to_linear(db: np.ndarray | float) -> np.ndarray:
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(value: np.ndarray | float) -> np.ndarray:
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def draw_gains(channel: ChannelConfig, rng: np.random.Generator, shape) -> np.ndarray:
    """Fading times shadowing per link; all ones when both are off."""
    h = np.ones(shape)
    if channel.rayleigh:
        h = h * rng.exponential(1.0, size=shape)
    if channel.shadowing_sigma > 0:
        h = h * db_to_linear(rng.normal(0.0, channel.shadowing_sigma, size=shape))
    return h


def sinr_from_distances(d: np.ndarray, gains: np.ndarray, channel: ChannelConfig) -> np.ndarray:
    """
    SINR per row of an (n_users, n_bs) distance matrix. The serving station is the
    row argmin of distance, whatever the gains.
    """
    d = np.atleast_2d(d)
    gains = np.broadcast_to(gains, d.shape)
    serving = np.argmin(d, axis=1)
    rows = np.arange(d.shape[0])
    if np.any(d[rows, serving] == 0):
        raise SingularPathLossError("User coincides with a base station; path loss is singular")
    received = channel.tx_power * gains * np.power(d, -channel.path_loss_alpha)
    signal = received[rows, serving]
    mask = np.ones_like(received, dtype=bool)
    mask[rows, serving] = False
    interference = np.where(mask, received, 0.0).sum(axis=1)
    return signal / (channel.noise + interference)


def _user_distances(pattern: PointPattern, users: np.ndarray) -> np.ndarray:
    delta = users[:, None, :] - pattern.coords[None, :, :]
    return np.hypot(delta[..., 0], delta[..., 1])


def sinr_at_user(pattern: PointPattern, user: Point, channel: ChannelConfig, seed: int) -> float:
    """Linear SINR of one user with freshly drawn gains."""
    if pattern.n == 0:
        raise DataError("SINR needs at least one base station")
    xy = np.array([[user.x, user.y]])
    if not pattern.window.contains(xy)[0]:
        raise DataError(f"User {user} lies outside the window {pattern.window}")
    d = _user_distances(pattern, xy)
    gains = draw_gains(channel, make_rng(seed), d.shape)
    return float(sinr_from_distances(d, gains, channel)[0])


def central_region(window: Window, fraction: float) -> Window:
    """Sub-window sharing the centre, scaled by ``fraction`` on each axis."""
    cx = 0.5 * (window.x_min + window.x_max)
    cy = 0.5 * (window.y_min + window.y_max)
    hw, hh = 0.5 * fraction * window.width, 0.5 * fraction * window.height
    return Window(cx - hw, cx + hw, cy - hh, cy + hh)


def place_users(pattern: PointPattern, placement: UserPlacement, rng: np.random.Generator) -> np.ndarray:
    """Uniform users in the central region, redrawing any that land on a station."""
    region = central_region(pattern.window, placement.region)
    users = region.uniform(rng, placement.n_users)
    for _ in range(USER_REDRAW_LIMIT):
        hit = np.flatnonzero(np.min(_user_distances(pattern, users), axis=1) == 0)
        if len(hit) == 0:
            return users
        users[hit] = region.uniform(rng, len(hit))
    raise SingularPathLossError(f"Users kept landing on base stations after {USER_REDRAW_LIMIT} redraws")


def coverage_poisson_interference_limited(thresholds_db: Sequence[float]) -> np.ndarray:
    """
    Coverage of a Poisson network with alpha=4, Rayleigh fading, no noise and no
    shadowing: 1 / (1 + sqrt(T) (pi/2 - arctan(1/sqrt(T)))).
    """
    s = np.sqrt(db_to_linear(thresholds_db))
    return 1.0 / (1.0 + s * (np.pi / 2.0 - np.arctan(1.0 / s)))


def _has_closed_form(channel: ChannelConfig) -> bool:
    return channel.rayleigh and channel.shadowing_sigma == 0 and channel.noise == 0 and channel.path_loss_alpha == 4


def coverage_curve(pattern: PointPattern, thresholds: Sequence[float], placement: UserPlacement,
                   channel: ChannelConfig, seed: int, reference: Optional[bool] = None) -> SummaryCurve:
    """
    Fraction of users with SINR > T at each threshold (dB). Each user gets fresh
    gains on every link. When the channel admits the Poisson closed form it is
    attached as the reference column, unless ``reference`` is False.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.ndim != 1 or len(thresholds) == 0 or np.any(np.diff(thresholds) <= 0):
        raise ConfigError("Thresholds must be a nonempty strictly ascending dB grid")
    if pattern.n == 0:
        raise DataError("Coverage needs at least one base station")

    rng = make_rng(seed)
    users = place_users(pattern, placement, rng)
    d = _user_distances(pattern, users)
    sinr = sinr_from_distances(d, draw_gains(channel, rng, d.shape), channel)
    values = np.mean(sinr[None, :] > db_to_linear(thresholds)[:, None], axis=1)

    ref = None
    if reference is None:
        reference = _has_closed_form(channel)
    if reference:
        ref = coverage_poisson_interference_limited(thresholds)
    logger.debug("Coverage over %d users, %d stations: median SINR %.2f dB",
                 placement.n_users, pattern.n, float(np.median(linear_to_db(np.maximum(sinr, 1e-300)))))
    return SummaryCurve(thresholds, values, "coverage", reference=ref)
