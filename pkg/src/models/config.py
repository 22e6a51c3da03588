"""Configuration objects for simulation, radio evaluation and the pipeline."""
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from src.utils import constants as C
from src.utils.errors import ConfigError
from src.utils.rng import check_seed

logger = logging.getLogger(__name__)


def env_seed(default: Optional[int] = None) -> Optional[int]:
    """Master seed from CELLGEO_SEED, if set."""
    raw = os.getenv(C.ENV_SEED)
    if raw is None or raw == "":
        return default
    try:
        return check_seed(int(raw))
    except ValueError:
        raise ConfigError(f"{C.ENV_SEED} must be an unsigned integer, got '{raw}'") from None


def env_mcmc_steps() -> int:
    raw = os.getenv(C.ENV_MCMC_STEPS)
    if not raw:
        return C.DEFAULT_MCMC_STEPS
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{C.ENV_MCMC_STEPS} must be an integer, got '{raw}'") from None


@dataclass(frozen=True)
class McmcConfig:
    """Birth/death/shift Metropolis-Hastings settings."""

    n_steps: int = C.DEFAULT_MCMC_STEPS
    p_birth: float = C.DEFAULT_P_BIRTH
    p_death: float = C.DEFAULT_P_DEATH
    p_shift: float = C.DEFAULT_P_SHIFT
    initial_state: str = "poisson"  # "empty" | "poisson"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        probs = (self.p_birth, self.p_death, self.p_shift)
        if any(p < 0 or p > 1 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ConfigError(f"Proposal probabilities must lie in [0,1] and sum to 1, got {probs}")
        if self.initial_state not in ("empty", "poisson"):
            raise ConfigError(f"initial_state must be 'empty' or 'poisson', got '{self.initial_state}'")


@dataclass(frozen=True)
class ChannelConfig:
    """Downlink channel: linear powers, path-loss exponent, shadowing sigma in dB."""

    tx_power: float = C.DEFAULT_TX_POWER
    path_loss_alpha: float = C.DEFAULT_PATH_LOSS
    noise: float = C.DEFAULT_NOISE
    shadowing_sigma: float = 0.0
    rayleigh: bool = True

    def __post_init__(self):
        if not self.tx_power > 0:
            raise ConfigError(f"tx_power must be > 0, got {self.tx_power}")
        if not self.path_loss_alpha > 2:
            raise ConfigError(f"path_loss_alpha must be > 2, got {self.path_loss_alpha}")
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        if self.shadowing_sigma < 0:
            raise ConfigError(f"shadowing_sigma must be >= 0, got {self.shadowing_sigma}")


@dataclass(frozen=True)
class UserPlacement:
    n_users: int = C.DEFAULT_N_USERS
    region: float = C.DEFAULT_USER_REGION

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigError(f"n_users must be >= 1, got {self.n_users}")
        if not 0 < self.region <= 1:
            raise ConfigError(f"region fraction must lie in (0, 1], got {self.region}")


def default_l_grid() -> Tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(0.01, 0.25, 25))


def pipeline_l_grid() -> Tuple[float, ...]:
    """Coarser L grid for the pipeline, which tests every fitted family at once."""
    return tuple(float(v) for v in np.linspace(0.02, 0.20, 10))


def default_g_grid() -> Tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(0.0, 0.1, 21))


def default_thresholds_db() -> Tuple[float, ...]:
    return tuple(float(v) for v in np.arange(-10.0, 21.0, 2.0))


@dataclass(frozen=True)
class PipelineConfig:
    """Everything ``run_pipeline`` needs; built from CLI flags and environment."""

    input_path: Path
    out_dir: Path
    seed: int
    mode: str = "planar"
    families: Tuple[str, ...] = ("poisson", "geyer", "matern_cluster")
    l_grid: Tuple[float, ...] = field(default_factory=pipeline_l_grid)
    g_grid: Tuple[float, ...] = field(default_factory=default_g_grid)
    thresholds_db: Tuple[float, ...] = field(default_factory=default_thresholds_db)
    nsim: int = C.PIPELINE_NSIM
    nrank: int = C.PIPELINE_NRANK
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    placement: UserPlacement = field(default_factory=UserPlacement)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    r_grid: Tuple[float, ...] = (0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08)
    sat_grid: Tuple[int, ...] = (1, 2, 3, 4, 5)
    hc_grid: Tuple[float, ...] = ()
    normalize: bool = True
    plot: bool = False

    def __post_init__(self):
        check_seed(self.seed)
        if self.mode not in ("planar", "geographic"):
            raise ConfigError(f"mode must be 'planar' or 'geographic', got '{self.mode}'")
        if not self.families:
            raise ConfigError("At least one model family is required")
        if self.nrank < 1 or self.nsim < 2 * self.nrank:
            raise ConfigError(f"Need nsim >= 2*nrank >= 2, got nsim={self.nsim}, nrank={self.nrank}")
        for name, grid in (("l_grid", self.l_grid), ("g_grid", self.g_grid), ("thresholds", self.thresholds_db)):
            if len(grid) == 0 or np.any(np.diff(grid) <= 0):
                raise ConfigError(f"{name} must be nonempty and strictly ascending")
