"""Boundary-free discrete wavelet coefficients of a finite sample.

Observations are ``x_1, ..., x_n`` (array index ``l - 1``) and
``W_{j,k} = sum_l x_l h_{j, 2^j k - l}`` is kept only for ``k < n_j``, the
range in which every contributing ``x_l`` is in the sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .basis import BSplineWavelet, FilterRow, filter_coeffs, make_bspline_family
from .validation import as_series_batch

__all__ = [
    "WaveletDecomposition",
    "BetweenScaleVector",
    "n_coeffs",
    "max_scale",
    "decompose",
    "decompose_via_difference",
    "between_scale",
    "WaveletVariance",
]


def n_coeffs(n: int, support_len: int, j: int) -> int:
    """Number of in-sample coefficients ``n_j = floor(2^-j (n - T + 1) - T + 1)``, clamped at 0."""
    t = support_len
    step = 2**j
    return max(0, (n - t + 1 - (t - 1) * step) // step)


def max_scale(n: int, support_len: int) -> int:
    """Largest ``j`` with ``n_j >= 1``; ``-1`` when even ``n_0 = 0``."""
    j = -1
    while n_coeffs(n, support_len, j + 1) >= 1:
        j += 1
    return j


@dataclass(frozen=True)
class WaveletDecomposition:
    """Coefficients ``coeffs[j - min_scale]`` of shape ``(..., n_j)`` for scales ``min_scale..J``.

    A leading batch axis is present when the input was 2-D.
    """

    n: int
    order: int
    min_scale: int
    coeffs: tuple

    @property
    def support_len(self) -> int:
        return 2 * self.order

    @property
    def max_scale(self) -> int:
        return self.min_scale + len(self.coeffs) - 1

    @property
    def scales(self) -> range:
        return range(self.min_scale, self.max_scale + 1)

    def __getitem__(self, j: int) -> np.ndarray:
        if not self.min_scale <= j <= self.max_scale:
            raise KeyError(f"scale {j} not stored; decomposition covers {self.min_scale}..{self.max_scale}")
        return self.coeffs[j - self.min_scale]

    def counts(self) -> np.ndarray:
        return np.array([c.shape[-1] for c in self.coeffs])

    def variances(self) -> np.ndarray:
        """Empirical ``sigma^2_j = n_j^-1 sum_k W_{j,k}^2``, shape ``(..., n_scales)``."""
        return np.stack([np.mean(c**2, axis=-1) for c in self.coeffs], axis=-1)

    def items(self):
        return zip(self.scales, self.coeffs)


@dataclass(frozen=True)
class BetweenScaleVector:
    """``W_{j,k}`` with the finer coefficients ``W_{j-u, 2^u k + v}``, ``v < 2^u``."""

    scale: int
    lag: int
    position: int
    value: float
    finer: np.ndarray


def _resolve_family(family) -> BSplineWavelet:
    if isinstance(family, BSplineWavelet):
        return family
    return make_bspline_family(int(family))


def _check_scales(n: int, fam: BSplineWavelet, J: Optional[int], j_min: int) -> int:
    top = max_scale(n, fam.support_len)
    if top < 0:
        raise ValueError(f"sample of size {n} is too short for order {fam.order}: no coefficient at scale 0")
    if J is None:
        J = top
    if J > top:
        raise ValueError(f"requested max scale {J} exceeds J(n) = {top} for n = {n}, T = {fam.support_len}")
    if not 0 <= j_min <= J:
        raise ValueError(f"min scale must lie in 0..{J}, got {j_min}")
    return int(J)


def _filter_downsample(x: np.ndarray, row: FilterRow, count: int) -> np.ndarray:
    """``out[k] = sum_t hrev[t] x[2^j k + t]`` along the last axis (polyphase accumulation)."""
    step = 2**row.scale
    hrev = row.coeffs[::-1]
    out = np.zeros(x.shape[:-1] + (count,))
    span = step * (count - 1) + 1
    for t, c in enumerate(hrev):
        out += c * x[..., t : t + span : step]
    return out


def decompose(x, family, J: Optional[int] = None, j_min: int = 0) -> WaveletDecomposition:
    """Wavelet coefficients of ``x`` (1-D, or 2-D with one series per row) for scales ``j_min..J``.

    Parameters
    ----------
    x : array_like
        Observations ``x_1..x_n`` along the last axis.
    family : BSplineWavelet or int
        Wavelet pair, or its order ``N``.
    J : int, optional
        Coarsest scale, at most ``J(n)``.  Defaults to ``J(n)``.
    j_min : int
        Finest scale to compute.

    Raises
    ------
    ValueError
        If ``J`` exceeds ``J(n)``; the message reports ``J(n)``.
    """
    fam = _resolve_family(family)
    arr = np.asarray(x, dtype=float)
    batch = as_series_batch(arr)
    n = batch.shape[-1]
    J = _check_scales(n, fam, J, j_min)
    out = []
    for j in range(j_min, J + 1):
        w = _filter_downsample(batch, filter_coeffs(fam, j), n_coeffs(n, fam.support_len, j))
        out.append(w[0] if arr.ndim == 1 else w)
    return WaveletDecomposition(n=n, order=fam.order, min_scale=j_min, coeffs=tuple(out))


def _moving_sum(s: np.ndarray, width: int) -> np.ndarray:
    """Full convolution of each row with ``ones(width)`` via cumulative sums."""
    length = s.shape[-1]
    c = np.zeros(s.shape[:-1] + (length + 1,), dtype=s.dtype)
    np.cumsum(s, axis=-1, out=c[..., 1:])
    i = np.arange(length + width - 1)
    return c[..., np.minimum(i + 1, length)] - c[..., np.maximum(i + 1 - width, 0)]


def decompose_via_difference(x, family, J: Optional[int] = None, j_min: int = 0) -> WaveletDecomposition:
    """Same coefficients computed as ``downsample(h~_j * Delta^M x)``.

    ``h~_j`` is applied in factored form: ``N`` moving sums of width ``2^j`` followed by
    the positive spline kernel, accumulated in extended precision.  In plain float64
    either form of ``h~_j`` multiplies rounding errors by roughly ``2^{jM}``.
    """
    fam = _resolve_family(family)
    arr = np.asarray(x, dtype=float)
    batch = as_series_batch(arr)
    n = batch.shape[-1]
    J = _check_scales(n, fam, J, j_min)
    m = fam.vanishing_moments
    # extended precision: each moving sum multiplies the rounding already present by up to 2^j
    diffed = np.diff(batch.astype(np.longdouble), m, axis=-1)  # Delta^M x at l = M+1..n
    out = []
    for j in range(j_min, J + 1):
        row = filter_coeffs(fam, j)
        step = 2**j
        count = n_coeffs(n, fam.support_len, j)
        s = diffed
        for _ in range(fam.order):
            s = _moving_sum(s, step)
        kernel = row.kernel.astype(np.longdouble)
        full = np.stack([np.convolve(series, kernel) for series in s]) * row.gain
        # Laurent index of full[..., 0]: (M + 1) - N (2^j - 1) + kernel_offset - N
        first = m + 1 - fam.order * (step - 1) + row.kernel_offset - fam.order
        w = full[..., step * np.arange(count) - first].astype(float)
        out.append(w[0] if arr.ndim == 1 else w)
    return WaveletDecomposition(n=n, order=fam.order, min_scale=j_min, coeffs=tuple(out))


def between_scale(decomp: WaveletDecomposition, j: int, u: int, k: int) -> BetweenScaleVector:
    """Pair ``W_{j,k}`` with ``(W_{j-u, 2^u k}, ..., W_{j-u, 2^u k + 2^u - 1})`` (1-D decompositions)."""
    if not 0 <= u <= j:
        raise ValueError(f"scale lag u must satisfy 0 <= u <= j, got u={u}, j={j}")
    coarse = decomp[j]
    fine = decomp[j - u]
    if coarse.ndim != 1:
        raise ValueError("between_scale expects a single-series decomposition")
    width = 2**u
    if not 0 <= k < coarse.shape[0]:
        raise IndexError(f"position {k} out of range 0..{coarse.shape[0] - 1} at scale {j}")
    if width * k + width > fine.shape[0]:
        raise IndexError(f"finer block {width * k}..{width * k + width - 1} exceeds n_{j - u} = {fine.shape[0]}")
    return BetweenScaleVector(
        scale=j, lag=u, position=k, value=float(coarse[k]), finer=fine[width * k : width * (k + 1)].copy()
    )


class WaveletVariance(BaseEstimator, TransformerMixin):
    """Map series (rows of ``X``) to their empirical wavelet variances per scale.

    Parameters
    ----------
    order : int
        B-spline order ``N``.
    min_scale, max_scale : int
        Scale range; ``max_scale=None`` uses ``J(n)`` of the training length.
    log : bool
        Return natural logarithms.
    """

    def __init__(self, order: int = 2, min_scale: int = 0, max_scale: Optional[int] = None, log: bool = False):
        self.order = order
        self.min_scale = min_scale
        self.max_scale = max_scale
        self.log = log

    def fit(self, X, y=None):
        X = as_series_batch(X)
        fam = make_bspline_family(self.order)
        self.n_obs_ = X.shape[1]
        self.max_scale_ = _check_scales(self.n_obs_, fam, self.max_scale, self.min_scale)
        self.scales_ = np.arange(self.min_scale, self.max_scale_ + 1)
        self.counts_ = np.array([n_coeffs(self.n_obs_, fam.support_len, j) for j in self.scales_])
        return self

    def transform(self, X):
        check_is_fitted(self, "scales_")
        X = as_series_batch(X)
        if X.shape[1] != self.n_obs_:
            raise ValueError(f"expected series of length {self.n_obs_}, got {X.shape[1]}")
        v = decompose(X, self.order, self.max_scale_, self.min_scale).variances()
        return np.log(v) if self.log else v

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "scales_")
        return np.array([f"scale_{j}" for j in self.scales_], dtype=object)
