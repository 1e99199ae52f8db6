"""Log-scale regression estimate of the memory parameter.

``d_hat = sum_i w_i log(sigma_hat^2_{J0 + i})`` over ``l + 1`` consecutive scales, with
weights satisfying ``sum w_i = 0`` and ``2 log 2 sum i w_i = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log
from typing import Optional, Union

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .basis import BSplineWavelet, FrequencyDescriptor, make_bspline_family
from .dwt import WaveletDecomposition, decompose, max_scale, n_coeffs
from .spectra import asymptotic_sq_norm, k_constant
from .validation import as_series

__all__ = [
    "ScaleSpectrum",
    "EstimateReport",
    "design_matrix",
    "target_vector",
    "scale_spectrum",
    "wls_weights",
    "check_weights",
    "estimate_d",
    "avar_matrix",
    "optimal_weights",
    "optimal_variance",
    "limit_variance",
    "confidence_interval",
    "auto_start_scale",
    "WaveletMemoryEstimator",
]

COND_LIMIT = 1e12
WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ScaleSpectrum:
    """Empirical wavelet variances ``sigma_hat^2_j`` and counts ``n_j`` for consecutive scales."""

    scales: np.ndarray
    variances: np.ndarray
    counts: np.ndarray

    @property
    def log_variances(self) -> np.ndarray:
        if np.any(self.variances <= 0):
            bad = self.scales[self.variances <= 0].tolist()
            raise ValueError(f"zero empirical variance at scales {bad}; log-regression is undefined")
        return np.log(self.variances)


@dataclass
class EstimateReport:
    """Outcome of one regression estimate."""

    d: float
    start_scale: int
    ell: int
    weights: np.ndarray
    m: int
    spectrum: ScaleSpectrum
    limit_variance: Optional[float] = None
    conf_int: Optional[tuple] = None
    level: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "d_hat": self.d,
            "J0": self.start_scale,
            "ell": self.ell,
            "m": self.m,
            "weights": self.weights.tolist(),
            "scales": [
                {"j": int(j), "n_j": int(n), "sigma2": float(v), "log_sigma2": float(np.log(v)) if v > 0 else None}
                for j, v, n in zip(self.spectrum.scales, self.spectrum.variances, self.spectrum.counts)
            ],
        }
        if self.limit_variance is not None:
            out["limit_variance"] = self.limit_variance
        if self.conf_int is not None:
            out["conf_int"] = list(self.conf_int)
            out["level"] = self.level
        out.update(self.extra)
        return out


def design_matrix(ell: int) -> np.ndarray:
    """``B`` with rows ``(1, i)``, ``i = 0..ell``."""
    return np.column_stack([np.ones(ell + 1), np.arange(ell + 1, dtype=float)])


def target_vector() -> np.ndarray:
    return np.array([0.0, 1.0 / (2.0 * log(2.0))])


def scale_spectrum(decomp: WaveletDecomposition, start_scale: int, ell: int) -> ScaleSpectrum:
    """Per-scale mean of squared coefficients for ``j = J0..J0+ell`` (no centring)."""
    if ell < 0:
        raise ValueError(f"ell must be >= 0, got {ell}")
    scales = np.arange(start_scale, start_scale + ell + 1)
    if scales[0] < decomp.min_scale or scales[-1] > decomp.max_scale:
        raise ValueError(
            f"scales {scales[0]}..{scales[-1]} not all available (decomposition has "
            f"{decomp.min_scale}..{decomp.max_scale})"
        )
    coeffs = [decomp[j] for j in scales]
    if any(c.shape[-1] == 0 for c in coeffs):
        raise ValueError("empty scale in the requested range")
    variances = np.stack([np.mean(c**2, axis=-1) for c in coeffs], axis=-1)
    return ScaleSpectrum(scales=scales, variances=variances, counts=np.array([c.shape[-1] for c in coeffs]))


def _solve(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise np.linalg.LinAlgError(f"{what} is singular to working precision (condition number {cond:.3g})")
    return np.linalg.solve(a, b)


def check_weights(w: np.ndarray, tol: float = WEIGHT_TOL) -> None:
    """Raise if ``w`` violates ``sum w = 0`` or ``2 log 2 sum i w_i = 1``."""
    w = np.asarray(w, dtype=float)
    i = np.arange(w.size)
    scale = max(1.0, float(np.sum(np.abs(w))))
    if abs(np.sum(w)) > tol * scale or abs(2 * log(2) * np.sum(i * w) - 1.0) > tol * scale * w.size:
        raise ValueError(f"weights violate the regression constraints: sum={np.sum(w):.3g}")


def wls_weights(ell: int, D: Optional[np.ndarray] = None) -> np.ndarray:
    """``w = D B (B^T D B)^{-1} b``; ``D = I`` gives ordinary least squares."""
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    b_mat = design_matrix(ell)
    D = np.eye(ell + 1) if D is None else np.asarray(D, dtype=float)
    if D.shape != (ell + 1, ell + 1):
        raise ValueError(f"D must be {(ell + 1, ell + 1)}, got {D.shape}")
    if np.any(np.linalg.eigvalsh(0.5 * (D + D.T)) <= 0):
        raise ValueError("D must be positive definite")
    db = D @ b_mat
    w = db @ _solve(b_mat.T @ db, target_vector(), "B^T D B")
    check_weights(w)
    return w


def estimate_d(spectrum: ScaleSpectrum, weights: np.ndarray) -> Union[float, np.ndarray]:
    """``sum_i w_i log sigma_hat^2_{J0+i}``; vectorised over leading batch axes."""
    weights = np.asarray(weights, dtype=float)
    if weights.size != spectrum.scales.size:
        raise ValueError(f"{weights.size} weights for {spectrum.scales.size} scales")
    check_weights(weights)
    return spectrum.log_variances @ weights


def _descriptor(family) -> FrequencyDescriptor:
    if isinstance(family, FrequencyDescriptor):
        return family
    if isinstance(family, BSplineWavelet):
        return family.descriptor()
    return make_bspline_family(int(family)).descriptor()


def avar_matrix(descriptor, d: float, ell: int, beta: float = 0.0) -> np.ndarray:
    """``V_{ij} = 4 pi 2^{2d|i-j|} 2^{min(i,j)} ||D_{inf,|i-j|}||^2 / K^2`` for ``0 <= i, j <= ell``."""
    desc = _descriptor(descriptor)
    k = k_constant(desc, d, beta=beta)
    norms = [asymptotic_sq_norm(desc, d, u, beta=beta) for u in range(ell + 1)]
    i = np.arange(ell + 1)
    lag = np.abs(i[:, None] - i[None, :])
    v = 4 * np.pi * 2.0 ** (2 * d * lag) * 2.0 ** np.minimum(i[:, None], i[None, :]) * np.take(norms, lag) / k**2
    if np.min(np.linalg.eigvalsh(v)) < -1e-10 * np.max(np.abs(v)):
        raise ArithmeticError("asymptotic covariance matrix is not positive semidefinite")
    return v


def optimal_weights(descriptor, d: float, ell: int, V: Optional[np.ndarray] = None) -> np.ndarray:
    """``V^{-1} B (B^T V^{-1} B)^{-1} b``, the minimum-variance valid weights."""
    V = avar_matrix(descriptor, d, ell) if V is None else np.asarray(V, dtype=float)
    b_mat = design_matrix(ell)
    vinv_b = _solve(V, b_mat, "V")
    w = vinv_b @ _solve(b_mat.T @ vinv_b, target_vector(), "B^T V^-1 B")
    check_weights(w)
    return w


def optimal_variance(V: np.ndarray, ell: int) -> float:
    """``(2 - 2^-ell) b^T (B^T V^{-1} B)^{-1} b``."""
    b_mat = design_matrix(ell)
    gram = b_mat.T @ _solve(V, b_mat, "V")
    b = target_vector()
    return float((2 - 2.0**-ell) * b @ _solve(gram, b, "B^T V^-1 B"))


def limit_variance(descriptor, d: float, weights: np.ndarray, V: Optional[np.ndarray] = None) -> float:
    """``(2 - 2^-ell) w^T V(psi, d) w``, the limit of ``m Var(d_hat)``."""
    ell = len(weights) - 1
    V = avar_matrix(descriptor, d, ell) if V is None else V
    return float((2 - 2.0**-ell) * weights @ V @ weights)


def confidence_interval(d_hat: float, limit_var: float, m: int, level: float = 0.95) -> tuple:
    """``d_hat -/+ z sqrt(limit_var / m)`` with ``z`` the two-sided normal quantile."""
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if m <= 0:
        raise ValueError("m must be positive")
    z = norm.ppf(0.5 + level / 2)
    half = z * np.sqrt(limit_var / m)
    return (float(d_hat - half), float(d_hat + half))


def auto_start_scale(n: int, beta: float = 2.0) -> int:
    """``round(log2(n) / (1 + 2 beta))``, balancing bias ``(m/n)^beta`` against variance ``1/m``."""
    return int(round(np.log2(n) / (1 + 2 * beta)))


def _admissible(desc: FrequencyDescriptor, d: float) -> float:
    """Clip a plug-in ``d`` into the range where ``V(psi, d)`` is defined."""
    lo = 0.5 - desc.decay_exponent + 1e-6
    hi = desc.vanishing_moments
    return float(min(max(d, lo), hi))


class WaveletMemoryEstimator(BaseEstimator):
    """Estimate the memory parameter ``d`` of a series by regressing log wavelet variances on scale.

    Parameters
    ----------
    order : int
        B-spline order ``N`` (``M = N`` vanishing moments).
    j0 : int or "auto"
        Finest scale used; ``"auto"`` picks ``round(log2(n) / (1 + 2 beta))``.
    ell : int
        Number of scales minus one.
    weights : {"ls", "opt"} or array_like
        Ordinary least squares, two-step optimal weights, or explicit weights.
    level : float
        Confidence level of ``conf_int_``.
    beta : float
        Smoothness exponent used by ``j0="auto"``.

    Attributes
    ----------
    d_ : float
    conf_int_ : tuple
    weights_ : ndarray
    spectrum_ : ScaleSpectrum
    report_ : EstimateReport
    """

    def __init__(self, order=2, j0="auto", ell=3, weights="ls", level=0.95, beta=2.0):
        self.order = order
        self.j0 = j0
        self.ell = ell
        self.weights = weights
        self.level = level
        self.beta = beta

    def _start_scale(self, n: int) -> int:
        if isinstance(self.j0, str):
            if self.j0 != "auto":
                raise ValueError(f"j0 must be an integer or 'auto', got {self.j0!r}")
            return auto_start_scale(n, self.beta)
        return int(self.j0)

    def fit(self, X, y=None):
        x = as_series(np.ravel(X) if np.ndim(X) == 2 and 1 in np.shape(X) else X, name="X")
        fam = make_bspline_family(self.order)
        desc = fam.descriptor()
        n = x.size
        j0 = self._start_scale(n)
        top = max_scale(n, fam.support_len)
        if j0 + self.ell > top:
            raise ValueError(f"scales {j0}..{j0 + self.ell} exceed J(n) = {top} for n = {n}")
        decomp = decompose(x, fam, j0 + self.ell, j_min=j0)
        spectrum = scale_spectrum(decomp, j0, self.ell)
        if isinstance(self.weights, str):
            if self.weights not in ("ls", "opt"):
                raise ValueError(f"weights must be 'ls', 'opt' or an array, got {self.weights!r}")
            w = wls_weights(self.ell)
        else:
            w = np.asarray(self.weights, dtype=float)
        d_hat = float(estimate_d(spectrum, w))
        if isinstance(self.weights, str) and self.weights == "opt":
            # two-step: re-weight with V evaluated at the preliminary estimate
            w = optimal_weights(desc, _admissible(desc, d_hat), self.ell)
            d_hat = float(estimate_d(spectrum, w))
        d_plug = _admissible(desc, d_hat)
        lim = limit_variance(desc, d_plug, w)
        m = int(np.sum(spectrum.counts))
        ci = confidence_interval(d_hat, lim, m, self.level)
        self.d_ = d_hat
        self.weights_ = w
        self.spectrum_ = spectrum
        self.conf_int_ = ci
        self.m_ = m
        self.n_obs_ = n
        self.report_ = EstimateReport(
            d=d_hat,
            start_scale=j0,
            ell=self.ell,
            weights=w,
            m=m,
            spectrum=spectrum,
            limit_variance=lim,
            conf_int=ci,
            level=self.level,
            extra={"n": n, "order": int(self.order), "plug_in_d": d_plug},
        )
        return self

    def predict(self, X=None):
        """The fitted ``d_``."""
        check_is_fitted(self, "d_")
        return self.d_
