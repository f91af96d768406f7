"""Stochastic local interaction (SLI) models for space-time interpolation.

Sparse precision matrices built from kernel-weighted local neighborhoods,
maximum-likelihood estimation, and prediction with conditional variances.
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.0.0"

from ._accel import get_backend, set_backend, set_threads
from .estimate import Bounds, FitOptions, FittedModel, SliParams, fit, nll, profile_lambda
from .evaluate import CvReport, MetricSet, metrics, one_slice_out
from .geometry import BandwidthSpec, Metric, MetricSpec, STDataset, compute_bandwidths
from .kernels import Kernel, build_weights, build_weights_gridded
from .precision import PrecisionParams, assemble_J, assemble_Jtilde
from .predict import PredictionResult, predict
from .simulate import GrfSpec, simulate_grf
from .sparse_linalg import factorize, log_determinant, solve
from .trend import Basis, TrendModel, ols_fit

__all__ = [
    "Basis", "BandwidthSpec", "Bounds", "CvReport", "FitOptions", "FittedModel", "GrfSpec",
    "Kernel", "Metric", "MetricSet", "MetricSpec", "PrecisionParams", "PredictionResult",
    "STDataset", "SliParams", "TrendModel", "assemble_J", "assemble_Jtilde", "build_weights",
    "build_weights_gridded", "compute_bandwidths", "factorize", "fit", "get_backend",
    "log_determinant", "metrics", "nll", "one_slice_out", "ols_fit", "predict",
    "profile_lambda", "set_backend", "set_threads", "simulate_grf", "solve",
]
