"""Exact Gaussian sampling of processes with memory parameter ``d``.

The stationary difference ``Delta^K X`` is drawn exactly from its autocovariance by
circulant embedding (dense eigen-factorisation as a fallback), then summed ``K`` times
from zero initial values.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi
from typing import Optional

import numpy as np
from scipy.linalg import eigh, toeplitz

from .models import MemoryModel, fgn_scale

__all__ = [
    "SamplerPlan",
    "autocovariance",
    "fractional_autocovariance",
    "fgn_autocovariance",
    "plan_sampler",
    "replicate_rng",
    "sample",
]

_EIG_TOL = 1e-8


def fgn_autocovariance(hurst: float, max_lag: int) -> np.ndarray:
    """``0.5 (|h+1|^{2H} - 2|h|^{2H} + |h-1|^{2H})`` for ``h = 0..max_lag``."""
    h = np.arange(max_lag + 1, dtype=float)
    e = 2.0 * hurst
    return 0.5 * (np.abs(h + 1) ** e - 2 * h**e + np.abs(h - 1) ** e)


def fractional_autocovariance(d: float, max_lag: int) -> np.ndarray:
    """Autocovariance of ``|1 - e^{-i lam}|^{-2d}`` (``d < 1/2``), with ``gamma(h) = int f e^{i lam h}``.

    ``gamma(0) = 2 pi Gamma(1 - 2d) / Gamma(1 - d)^2`` and
    ``gamma(h) = gamma(h - 1) (h - 1 + d) / (h - d)``.
    """
    if d >= 0.5:
        raise ValueError(f"fractional noise is stationary only for d < 1/2, got {d}")
    out = np.empty(max_lag + 1)
    out[0] = 2 * pi * gamma(1 - 2 * d) / gamma(1 - d) ** 2
    h = np.arange(1, max_lag + 1, dtype=float)
    out[1:] = out[0] * np.cumprod((h - 1 + d) / (h - d))
    return out


def _smooth_coefficients(model: MemoryModel, tol: float = 1e-15) -> np.ndarray:
    """``int f*(lam) e^{i lam k} dlam`` for ``k = 0..L`` by the periodic trapezoidal rule.

    The grid doubles until the coefficients beyond the retained range are below ``tol``
    relative; ``L`` is the last coefficient above that level.
    """
    size = 1024
    while True:
        lam = 2 * pi * np.arange(size) / size
        wrapped = np.where(lam > pi, lam - 2 * pi, lam)
        coef = 2 * pi * np.real(np.fft.ifft(model.fstar(wrapped)))
        half = coef[: size // 2]
        big = np.abs(half) > tol * abs(half[0])
        last = int(np.nonzero(big)[0].max())
        if last < size // 4 or size >= 2**22:
            return half[: last + 1]
        size *= 2


def autocovariance(model: MemoryModel, max_lag: int) -> np.ndarray:
    """Autocovariance of ``Delta^K X`` for lags ``0..max_lag``.

    Closed forms for FGN, FBM increments and white noise.  Otherwise the density
    ``|1 - e^{-i lam}|^{-2(d-K)} f*`` is treated as a product: the fractional part has an
    exact recursion, ``f*`` is expanded in Fourier coefficients, and
    ``gamma = (2 pi)^{-1} gamma_frac * gamma_smooth``.
    """
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if model.kind == "fgn":
        return fgn_autocovariance(model.params["hurst"], max_lag)
    if model.kind == "fbm":
        h = model.params["hurst"]
        return fgn_autocovariance(h, max_lag) / fgn_scale(h)
    if model.kind == "white":
        out = np.zeros(max_lag + 1)
        out[0] = 2 * pi * model.params["sigma2"]
        return out
    frac_d = model.d - model.K
    smooth = _smooth_coefficients(model)
    width = smooth.size - 1
    frac = fractional_autocovariance(frac_d, max_lag + width)
    # two-sided sums: gamma(h) = (2 pi)^-1 sum_k smooth(|k|) frac(|h - k|)
    k = np.arange(-width, width + 1)
    two_sided = smooth[np.abs(k)]
    lags = np.arange(max_lag + 1)
    out = np.array([np.dot(two_sided, frac[np.abs(h - k)]) for h in lags]) / (2 * pi)
    return out


@dataclass(frozen=True)
class SamplerPlan:
    """Everything needed to draw ``Delta^K X`` of length ``n``.

    ``factor`` holds ``sqrt(eigenvalues / size)`` of the circulant embedding, or the
    dense square-root factor ``L`` with ``L L^T = Toeplitz(gamma)``.
    """

    model: MemoryModel
    n: int
    method: str
    gamma: np.ndarray
    factor: np.ndarray
    embedding_size: int

    @property
    def K(self) -> int:
        return self.model.K


def _next_pow2(x: int) -> int:
    return 1 << max(0, int(x - 1).bit_length())


def plan_sampler(model: MemoryModel, n: int, max_factor: int = 16) -> SamplerPlan:
    """Build a circulant embedding of size ``>= 2(n-1)``, doubling until its spectrum is
    non-negative (up to ``max_factor * n``), else fall back to a dense factorisation."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    size = max(2, _next_pow2(2 * (n - 1)))
    while size <= max_factor * n:
        half = size // 2
        g = autocovariance(model, half)
        c = np.concatenate([g, g[-2:0:-1]])
        ev = np.real(np.fft.fft(c))
        if ev.min() >= -_EIG_TOL * ev.max():
            ev = np.clip(ev, 0.0, None)
            return SamplerPlan(model, n, "circulant", g[:n], np.sqrt(ev / size), size)
        size *= 2
    g = autocovariance(model, n - 1)
    w, v = eigh(toeplitz(g))
    if w.min() < -_EIG_TOL * max(w.max(), 1.0):
        raise np.linalg.LinAlgError(f"autocovariance is not positive semidefinite (eigenvalue {w.min():.3g})")
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    return SamplerPlan(model, n, "dense", g, factor, n)


def replicate_rng(seed, replicate: int) -> np.random.Generator:
    """Counter-based generator for one replicate; independent of how replicates are scheduled.

    ``seed`` is an integer or a sequence of integers (as accepted by ``SeedSequence``).
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replicate,))))


def _stationary(plan: SamplerPlan, rng: np.random.Generator) -> np.ndarray:
    if plan.method == "circulant":
        size = plan.embedding_size
        z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        return np.real(np.fft.fft(plan.factor * z))[: plan.n]
    return plan.factor @ rng.standard_normal(plan.n)


def sample(plan: SamplerPlan, seed=0, reps: int = 1, start: int = 0) -> np.ndarray:
    """Draw replicates ``start..start+reps-1``; returns shape ``(reps, n)``.

    Replicate ``r`` always uses ``replicate_rng(seed, r)``, so any slice of replicates is
    reproducible on its own.
    """
    out = np.empty((reps, plan.n))
    for i in range(reps):
        x = _stationary(plan, replicate_rng(seed, start + i))
        for _ in range(plan.K):
            x = np.cumsum(x)
        out[i] = x
    return out
