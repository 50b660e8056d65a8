"""Photodegradation path models and outdoor damage prediction."""

from ._core import (
    CombinedParams,
    ConfigurationError,
    DomainError,
    Error,
    ValidationError,
    aic,
    arrhenius_log,
    degradation_path,
    estimate_random_effect,
    nd_log_effect,
    predict_synthetic,
    prediction_mse,
    rh_log_effect,
    run,
    sigma_of_lambda,
)

__all__ = [
    "CombinedParams",
    "ConfigurationError",
    "DomainError",
    "Error",
    "ValidationError",
    "aic",
    "arrhenius_log",
    "degradation_path",
    "estimate_random_effect",
    "nd_log_effect",
    "predict_synthetic",
    "prediction_mse",
    "rh_log_effect",
    "run",
    "sigma_of_lambda",
]
