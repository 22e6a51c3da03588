"""Exact and MCMC samplers for the supported point-process families."""
