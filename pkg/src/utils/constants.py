"""
Constants used throughout the base-station geometry toolkit.
"""

# Mean Earth radius used by the equirectangular projection (km)
EARTH_RADIUS_KM = 6371.0

# Relative tolerance applied to every "distance <= r" comparison
DIST_RTOL = 1e-12

# Environment variables
ENV_SEED = "CELLGEO_SEED"
ENV_LOG_LEVEL = "CELLGEO_LOG_LEVEL"
ENV_MCMC_STEPS = "CELLGEO_MCMC_STEPS"

# Pre-judgement survey (interval and L-grid resolution)
CLASSIFY_INTERVAL_MAX = 0.15
CLASSIFY_GRID_SIZE = 64
# L(r) - r within this many Poisson standard errors of zero does not decide a verdict
CLASSIFY_TOLERANCE_SE = 3.0
SURVEY_COUNT_RANGE = (60, 220)
SURVEY_RETRY_FACTOR = 100

# Envelope defaults; nsim=599, nrank=30 gives the same alpha
DEFAULT_NSIM = 99
DEFAULT_NRANK = 5
ENVELOPE_MAX_UNDEFINED = 0.10

# Pipeline envelopes (pointwise alpha = 0.01)
PIPELINE_NSIM = 199
PIPELINE_NRANK = 1

# MCMC defaults
DEFAULT_MCMC_STEPS = 100_000
DEFAULT_P_BIRTH = 0.4
DEFAULT_P_DEATH = 0.4
DEFAULT_P_SHIFT = 0.2

# Pseudolikelihood optimizer
NEWTON_MAX_ITER = 100
NEWTON_GRAD_TOL = 1e-8
DUMMY_GRID_FACTOR = 4

# Channel defaults (linear units except sigma in dB)
DEFAULT_TX_POWER = 1.0
DEFAULT_PATH_LOSS = 4.0
DEFAULT_NOISE = 0.0
DEFAULT_SHADOW_SIGMA_DB = 8.0
DEFAULT_N_USERS = 1000
DEFAULT_USER_REGION = 2.0 / 3.0
USER_REDRAW_LIMIT = 100

# Fitted parameters of the urban (U) and rural (R) unit-square patterns.
# The SH row omits gamma, so rural-sh carries an explicit default.
PRESETS = {
    "urban-poisson": {"family": "poisson", "lambda": 47.50},
    "urban-geyer": {"family": "geyer", "beta": 182.93, "gamma": 1.25, "r": 0.03, "sat": 4},
    "urban-mcp": {"family": "matern_cluster", "kappa": 162.48, "r": 0.067, "mu": 1.61},
    "rural-poisson": {"family": "poisson", "lambda": 35.75},
    "rural-phcp": {"family": "poisson_hardcore", "beta": 173.34, "h_c": 0.015},
    "rural-sh": {"family": "strauss_hardcore", "beta": 237.24, "gamma": 0.5, "r": 0.03, "h_c": 0.015},
    "rural-geyer": {"family": "geyer", "beta": 26.08, "gamma": 6.01, "r": 0.073, "sat": 1},
}
