"""Candidate transform classes behind one fit/predict mapping interface."""
from .base import FittedMap, MappingMethod, as_values, make_method, method_kinds, predict_map
from .lasso import LassoMethod, fit_lasso
from .mlp import MlpMethod, fit_mlp
from .ridge import DEFAULT_LAMBDA_GRID, RidgeMethod, fit_ridge, ridge_path
from .rsa import RsaComparator, rsa_score
from .soft_matching import (
    SoftMatchingMethod,
    fit_soft_matching,
    predict_soft_matching,
    soft_matching_score,
)
from .zippering import (
    ApproxZipperingMethod,
    ExactZipperingMethod,
    fit_approx_zippering,
    fit_exact_zippering,
)

__all__ = [
    "FittedMap",
    "MappingMethod",
    "as_values",
    "make_method",
    "method_kinds",
    "predict_map",
    "DEFAULT_LAMBDA_GRID",
    "RidgeMethod",
    "fit_ridge",
    "ridge_path",
    "LassoMethod",
    "fit_lasso",
    "SoftMatchingMethod",
    "fit_soft_matching",
    "predict_soft_matching",
    "soft_matching_score",
    "ExactZipperingMethod",
    "ApproxZipperingMethod",
    "fit_exact_zippering",
    "fit_approx_zippering",
    "MlpMethod",
    "fit_mlp",
    "RsaComparator",
    "rsa_score",
]
