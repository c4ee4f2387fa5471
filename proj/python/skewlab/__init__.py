"""Skew diffusion simulation, local time estimation and convergence checks."""

from ._core import (
    Expr,
    SkewlabError,
    alpha_limit,
    kappa,
    ks_critical_value,
    ks_distance,
    local_time,
    phi,
    run_command,
    simulate_skew,
    wasserstein1,
)

__all__ = [
    "Expr",
    "SkewlabError",
    "alpha_limit",
    "kappa",
    "ks_critical_value",
    "ks_distance",
    "local_time",
    "phi",
    "run_command",
    "simulate_skew",
    "wasserstein1",
]
