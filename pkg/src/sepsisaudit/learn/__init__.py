"""The sixteen classifier configurations with scaling, CV, and Youden thresholds."""

from .base import (
    ALIASES,
    FAMILIES,
    FAMILY_NAMES,
    FEATURE_NAMES,
    ClassifierSpec,
    CvRecord,
    Scaler,
    TrainedModel,
    apply_scaler,
    cross_validate,
    default_specs,
    fit_scaler,
    resolve_family,
    separable_benchmark,
    train,
    youden_threshold,
)
from .linear import (
    LinearModel,
    hinge_gradient,
    hinge_objective,
    logistic_gradient,
    logistic_objective,
)

__all__ = [
    "ALIASES",
    "FAMILIES",
    "FAMILY_NAMES",
    "FEATURE_NAMES",
    "ClassifierSpec",
    "CvRecord",
    "LinearModel",
    "Scaler",
    "TrainedModel",
    "apply_scaler",
    "cross_validate",
    "default_specs",
    "fit_scaler",
    "hinge_gradient",
    "hinge_objective",
    "logistic_gradient",
    "logistic_objective",
    "resolve_family",
    "separable_benchmark",
    "train",
    "youden_threshold",
]
