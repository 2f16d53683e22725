"""Bayesian spatial extremes: GEV margins, Gaussian copula, latent GP regressions."""

from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    conditional_simulate,
    copula_loglik,
    default_config,
    distance,
    distance_matrix,
    ess,
    gev_cdf,
    gev_fit,
    gev_logpdf,
    gev_quantile,
    independence_test,
    krige,
    normalize_config,
    read_archive,
    return_level,
    rhat,
    simulate,
    space_filling_knots,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "conditional_simulate",
    "copula_loglik",
    "default_config",
    "distance",
    "distance_matrix",
    "ess",
    "gev_cdf",
    "gev_fit",
    "gev_logpdf",
    "gev_quantile",
    "independence_test",
    "krige",
    "normalize_config",
    "read_archive",
    "return_level",
    "rhat",
    "simulate",
    "space_filling_knots",
]
