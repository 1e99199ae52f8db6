"""Wavelet estimation of the memory parameter of long-range dependent time series.

B-spline wavelet filter banks, a decimated wavelet transform, exact and large-scale
spectral densities of wavelet coefficients, a log-scale regression estimator of ``d``
with confidence intervals, exact Gaussian simulation and a Monte Carlo harness.
"""

from __future__ import annotations

from .basis import (
    BSplineWavelet,
    FilterBank,
    FilterRow,
    circle_grid,
    filter_bank,
    filter_coeffs,
    make_bspline_family,
    shannon_descriptor,
)
from .dwt import WaveletDecomposition, WaveletVariance, between_scale, decompose, decompose_via_difference
from .estimator import (
    EstimateReport,
    WaveletMemoryEstimator,
    avar_matrix,
    estimate_d,
    limit_variance,
    optimal_weights,
    wls_weights,
)
from .models import MemoryModel, arfima, custom, fbm, fgn, parse_model, white_noise
from .simulate import plan_sampler, sample

__version__ = "0.1.0"

__all__ = [
    "BSplineWavelet",
    "FilterBank",
    "FilterRow",
    "circle_grid",
    "filter_bank",
    "filter_coeffs",
    "make_bspline_family",
    "shannon_descriptor",
    "WaveletDecomposition",
    "WaveletVariance",
    "between_scale",
    "decompose",
    "decompose_via_difference",
    "EstimateReport",
    "WaveletMemoryEstimator",
    "avar_matrix",
    "estimate_d",
    "limit_variance",
    "optimal_weights",
    "wls_weights",
    "MemoryModel",
    "arfima",
    "custom",
    "fbm",
    "fgn",
    "parse_model",
    "white_noise",
    "plan_sampler",
    "sample",
]
