"""Bayesian log-concave density estimation with piecewise log-linear priors."""

from .core import (
    DataError,
    LogConcaveError,
    MixtureLogDensity,
    NormalizedDensity,
    NumericError,
    PiecewiseLinearFn,
    ValidationError,
    hellinger,
    log_norm_const,
    mixture_to_plf,
    normalize,
)

__version__ = "0.1.0"
