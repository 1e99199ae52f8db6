"""Covariances and spectral densities of wavelet coefficients.

Every integral against ``f(lam) = |1 - e^{-i lam}|^{-2d} f*(lam)`` is written in the
stabilised form ``|1 - e^{-i lam}|^{2(M - d)} f*(lam) H~_j(lam) conj(H~_j'(lam))``, which is
bounded for ``d <= M`` and has an integrable power singularity for ``M < d < M + 1/2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import ceil, log2
from typing import Callable, Optional

import numpy as np

from .basis import BSplineWavelet, FilterRow, FrequencyDescriptor, circle_grid, filter_coeffs
from .models import MemoryModel

__all__ = [
    "Quantity",
    "QuadratureWarning",
    "gsd",
    "wavelet_cov",
    "wavelet_variance",
    "cross_density_exact",
    "cross_density_on_grid",
    "cross_density_asymptotic",
    "asymptotic_sq_norm",
    "k_constant",
    "mn_functional",
    "empvar_cov_prediction",
    "empvar_limit_ratio",
    "integrate",
]

REL_TOL = 1e-8
_GRADE_RATIO = 0.15
_HI_NODES, _LO_NODES = 16, 11


class QuadratureWarning(RuntimeWarning):
    """A quadrature or series did not reach its accuracy target."""


@dataclass(frozen=True)
class Quantity:
    """A computed number with an estimate of its absolute numerical error."""

    value: float
    error: float

    def __float__(self) -> float:
        return float(self.value)


def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def _graded_edges(lo: float, hi: float, width: float, floor: float = 1e-14) -> np.ndarray:
    """Panel edges on ``[lo, hi]``: geometric towards ``lo`` inside the first ``width``, uniform after."""
    width = min(width, hi - lo)
    k = max(1, ceil(np.log(floor / width) / np.log(_GRADE_RATIO)))
    graded = lo + width * _GRADE_RATIO ** np.arange(k, 0, -1)
    count = max(1, ceil((hi - lo - width) / width))
    uniform = np.linspace(lo + width, hi, count + 1)
    return np.concatenate([[lo], graded, uniform])


def _rule(edges: np.ndarray, n: int):
    s, w = _gl(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (a + half * (s + 1)).ravel(), (half * w).ravel()


def _integrate_with_scale(fun: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> tuple:
    x_hi, w_hi = _rule(edges, _HI_NODES)
    x_lo, w_lo = _rule(edges, _LO_NODES)
    vals = fun(np.concatenate([x_hi, x_lo]))
    hi = np.tensordot(w_hi, vals[: x_hi.size], axes=(0, 0))
    lo = np.tensordot(w_lo, vals[x_hi.size :], axes=(0, 0))
    scale = np.tensordot(w_hi, np.abs(vals[: x_hi.size]), axes=(0, 0))
    err = np.max(np.abs(hi - lo) + 64 * np.finfo(float).eps * scale)
    return Quantity(hi, float(err)), float(np.max(scale))


def integrate(fun: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> Quantity:
    """Composite Gauss-Legendre on the given panels, error from a coarser companion rule."""
    return _integrate_with_scale(fun, edges)[0]


def _integrate_to_tol(fun, make_edges, what: str, tol: float = REL_TOL, max_halvings: int = 3) -> Quantity:
    """Refine until the error is below ``tol`` times ``int |fun|``.

    For oscillatory integrands that nearly cancel (covariances at long lags) the
    attainable accuracy is relative to ``int |fun|``, not to the small result.
    """
    q = None
    for level in range(max_halvings + 1):
        q, magnitude = _integrate_with_scale(fun, make_edges(level))
        if q.error <= tol * max(magnitude, 1e-300):
            return q
    warnings.warn(f"{what}: quadrature error {q.error:.2e} above relative target {tol:.0e}", QuadratureWarning)
    return q


def gsd(model: MemoryModel, lam) -> np.ndarray:
    """Generalized spectral density ``|1 - e^{-i lam}|^{-2d} f*(lam)``."""
    return model.spectral_density(lam)


def _resolve_family(family) -> BSplineWavelet:
    if isinstance(family, BSplineWavelet):
        return family
    return BSplineWavelet(int(family))


def _check_order(model: MemoryModel, fam: BSplineWavelet) -> None:
    if fam.vanishing_moments < model.K:
        raise ValueError(
            f"wavelet with M = {fam.vanishing_moments} vanishing moments cannot handle "
            f"K = {model.K} (d = {model.d}); need M >= K"
        )


def _stabilised(model: MemoryModel, m: int, lam: np.ndarray) -> np.ndarray:
    # wrap into (-pi, pi]: f* is only defined there, and the density is 2 pi periodic
    wrapped = np.mod(lam + np.pi, 2 * np.pi) - np.pi
    two_sin = np.abs(2.0 * np.sin(0.5 * lam))
    expo = 2.0 * (m - model.d)
    with np.errstate(divide="ignore"):
        power = np.where(two_sin == 0, 1.0 if expo == 0 else (0.0 if expo > 0 else np.inf), two_sin**expo)
    return power * model.fstar(wrapped)


def _panel_width(degree: float) -> float:
    return min(np.pi / 8, 4.0 / max(degree, 1.0))


def wavelet_cov(model: MemoryModel, family, j: int, k: int, j2: int, k2: int, full_output: bool = False):
    """``Cov(W_{j,k}, W_{j2,k2}) = int e^{i lam (k 2^j - k2 2^j2)} f H_j conj(H_j2) dlam``.

    Returns a float, or a :class:`Quantity` when ``full_output`` is set.
    """
    fam = _resolve_family(family)
    _check_order(model, fam)
    rows = filter_coeffs(fam, j), filter_coeffs(fam, j2)
    tau = k * 2**j - k2 * 2**j2
    m = fam.vanishing_moments
    degree = abs(tau) + len(rows[0].coeffs) + len(rows[1].coeffs)

    def integrand(lam):
        a = rows[0].reduced_transfer(lam)
        b = a if (j == j2) else rows[1].reduced_transfer(lam)
        return 2.0 * np.real(np.exp(1j * lam * tau) * a * np.conj(b)) * _stabilised(model, m, lam)

    q = _integrate_to_tol(
        integrand,
        lambda level: _graded_edges(0.0, np.pi, _panel_width(degree) / 2**level),
        f"covariance at scales ({j}, {j2})",
    )
    q = Quantity(float(q.value), q.error)
    return q if full_output else q.value


def wavelet_variance(model: MemoryModel, family, j: int, full_output: bool = False):
    """``sigma^2_j = Var(W_{j,0})``."""
    return wavelet_cov(model, family, j, 0, j, 0, full_output=full_output)


def _e_vector(xi: np.ndarray, u: int) -> np.ndarray:
    v = np.arange(2**u)
    return 2.0 ** (-u / 2) * np.exp(-1j * np.multiply.outer(xi, v) / 2**u)


def _check_lag(j: int, u: int) -> None:
    if not 0 <= u <= j:
        raise ValueError(f"scale lag must satisfy 0 <= u <= j, got u={u}, j={j}")


def cross_density_exact(model: MemoryModel, family, j: int, u: int, lam) -> np.ndarray:
    """``D_{j,u}(lam)``, shape ``(len(lam), 2^u)``, from the folded sum over ``2^j`` aliases."""
    fam = _resolve_family(family)
    _check_order(model, fam)
    _check_lag(j, u)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    m = fam.vanishing_moments
    coarse, fine = filter_coeffs(fam, j), filter_coeffs(fam, j - u)
    xi = lam[:, None] + 2 * np.pi * np.arange(2**j)[None, :]
    mu = xi / 2**j
    prod = coarse.reduced_transfer(mu) * np.conj(fine.reduced_transfer(mu)) * _stabilised(model, m, mu)
    prod *= 2.0 ** (-j / 2) * 2.0 ** (-(j - u) / 2)
    return np.einsum("ql,qlv->qv", prod, _e_vector(xi, u))


def cross_density_on_grid(model: MemoryModel, family, j: int, u: int, size: int) -> np.ndarray:
    """``D_{j,u}`` on ``circle_grid(size)`` using FFTs of length ``2^j size``."""
    fam = _resolve_family(family)
    _check_order(model, fam)
    _check_lag(j, u)
    m = fam.vanishing_moments
    big = 2**j * size
    start = -np.pi / 2**j
    coarse, fine = filter_coeffs(fam, j), filter_coeffs(fam, j - u)
    a = coarse.reduced_on_grid(big, start)
    b = a if u == 0 else fine.reduced_on_grid(big, start)
    mu = start + 2 * np.pi * np.arange(big) / big
    prod = (a * np.conj(b) * _stabilised(model, m, mu)) * 2.0 ** (-j + u / 2)
    prod = prod.reshape(2**j, size)  # row l holds lam_g + 2 l pi
    xi = 2**j * mu.reshape(2**j, size)
    out = np.zeros((size, 2**u), dtype=complex)
    for v in range(2**u):
        out[:, v] = np.sum(prod * (2.0 ** (-u / 2) * np.exp(-1j * v * xi / 2**u)), axis=0)
    return out


def _descriptor(family) -> FrequencyDescriptor:
    if isinstance(family, FrequencyDescriptor):
        return family
    return _resolve_family(family).descriptor()


def _check_asymptotic_range(desc: FrequencyDescriptor, d: float, upper_extra: float, beta: float) -> None:
    lo = (1.0 + beta) / 2.0 - desc.decay_exponent
    hi = desc.vanishing_moments + upper_extra
    ok = (d > lo) and (d < hi if upper_extra > 0 else d <= hi)
    if not ok:
        closing = ")" if upper_extra > 0 else "]"
        raise ValueError(f"d = {d} outside the admissible interval ({lo}, {hi}{closing}")


def _series_terms(desc: FrequencyDescriptor, d: float, u: int, tol: float = 1e-10) -> int:
    """Half-width ``L`` of the truncated lattice sum, from ``|psi_hat(xi)| <= C |xi|^-alpha``."""
    if desc.band is not None:
        return int(ceil(desc.band[1] * 2**u / (2 * np.pi))) + 1
    c, alpha = desc.decay_const, desc.decay_exponent
    p = 2.0 * d + 2.0 * alpha
    # 2 C^2 2^{u alpha} int_L^inf (2 pi x - pi)^-p dx <= tol
    coef = 2.0 * c**2 * 2.0 ** (u * alpha) / (2 * np.pi * (p - 1.0))
    x = (coef / tol) ** (1.0 / (p - 1.0))
    return int(ceil((x + np.pi) / (2 * np.pi))) + 1


def _reduced_power(xi: np.ndarray, expo: float) -> np.ndarray:
    a = np.abs(xi)
    with np.errstate(divide="ignore"):
        return np.where(a == 0, 1.0 if expo == 0 else 0.0, a**expo)


def _lattice_truncated(desc: FrequencyDescriptor, lam: np.ndarray, d: float, u: int) -> np.ndarray:
    big_l = _series_terms(desc, d, u)
    r = desc.reduced_order
    out = np.zeros((lam.size, 2**u), dtype=complex)
    for chunk in np.array_split(np.arange(-big_l, big_l + 1), max(1, (2 * big_l + 1) // 4096)):
        xi = lam[:, None] + 2 * np.pi * chunk[None, :]
        term = (
            _reduced_power(xi, 2.0 * r - 2.0 * d)
            * 2.0 ** (-u * r)
            * np.conj(desc.reduced(xi))
            * desc.reduced(xi / 2**u)
        )
        out += np.einsum("ql,qlv->qv", term, _e_vector(xi, u))
    return out


def cross_density_asymptotic(
    descriptor, d: float, u: int, lam, beta: float = 0.0, exact: Optional[bool] = None
) -> np.ndarray:
    """``D_{inf,u}(lam; d)``, shape ``(len(lam), 2^u)``.

    Uses the descriptor's closed-form lattice sum when it has one; otherwise the series is
    truncated at ``|l| <= L`` with ``L`` chosen from the decay bound so the tail is below 1e-10.
    ``exact=False`` forces the truncated series.
    """
    desc = _descriptor(descriptor)
    if u < 0:
        raise ValueError(f"scale lag must be non-negative, got {u}")
    _check_asymptotic_range(desc, d, 0.0, beta)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    use_exact = desc.lattice_sum is not None if exact is None else exact
    if use_exact:
        if desc.lattice_sum is None:
            raise ValueError(f"descriptor {desc.name!r} has no closed-form lattice sum")
        return desc.lattice_sum(lam, d, u)
    return _lattice_truncated(desc, lam, d, u)


def _band_edges(desc: FrequencyDescriptor, hi: float) -> np.ndarray:
    pts = sorted({0.0, hi, *[b for b in desc.breakpoints if 0 < b < hi]})
    return np.array(pts)


def asymptotic_sq_norm(descriptor, d: float, u: int, beta: float = 0.0, full_output: bool = False):
    """``int_{-pi}^{pi} |D_{inf,u}(lam; d)|^2 dlam``."""
    desc = _descriptor(descriptor)

    def integrand(lam):
        vals = cross_density_asymptotic(desc, d, u, lam, beta=beta)
        return 2.0 * np.sum(np.abs(vals) ** 2, axis=1)

    if desc.band is not None:
        # band-limited: piecewise constant in lam between multiples of pi 2^-u
        edges = np.linspace(0, np.pi, 2**u + 1)
        q = integrate(integrand, np.unique(np.concatenate([edges, [1e-12, np.pi - 1e-12]])))
    else:
        q = _integrate_to_tol(
            integrand, lambda level: _graded_edges(0.0, np.pi, (np.pi / 8) / 2**level), f"||D_inf,{u}||^2"
        )
    q = Quantity(float(q.value), q.error)
    return q if full_output else q.value


def k_constant(descriptor, d: float, beta: float = 0.0, full_output: bool = False):
    """``K(psi, d) = int_R |xi|^{-2d} |psi_hat(xi)|^2 dxi``.

    ``[0, 1]`` is integrated on a mesh graded towards the ``|xi|^{2(M-d)}`` behaviour at 0,
    ``[1, X]`` panel by panel, and ``(X, inf)`` is bounded by ``C^2 X^{1-p} / (p - 1)`` with
    ``p = 2d + 2 alpha``; ``X`` is chosen so that this bound is below ``1e-9 K``.
    """
    desc = _descriptor(descriptor)
    _check_asymptotic_range(desc, d, 0.5, beta)
    r = desc.reduced_order

    def integrand(xi):
        return 2.0 * _reduced_power(xi, 2.0 * r - 2.0 * d) * np.abs(desc.reduced(xi)) ** 2

    if desc.band is not None:
        lo, hi = desc.band
        q = integrate(integrand, np.linspace(lo, hi, 9))
        q = Quantity(float(q.value), q.error)
        return q if full_output else q.value

    head = integrate(integrand, _graded_edges(0.0, 1.0, 0.25))
    c, alpha = desc.decay_const, desc.decay_exponent
    p = 2.0 * d + 2.0 * alpha
    target = 1e-9 * max(float(head.value), 1e-300)
    x_max = max(2.0, (2.0 * c**2 / ((p - 1.0) * target)) ** (1.0 / (p - 1.0)))
    edges = np.concatenate([[1.0], np.arange(np.pi, x_max + np.pi, np.pi)])
    body = integrate(integrand, edges)
    tail = 2.0 * c**2 * edges[-1] ** (1.0 - p) / (p - 1.0)
    value = float(head.value + body.value)
    return Quantity(value, head.error + body.error + tail) if full_output else value


def mn_functional(g, n: int) -> float:
    """``M_n(g) = (sum_k (1 - |k|/n)_+ |c_k|^2)^{1/2}`` with ``c_k = int g(lam) e^{i k lam} dlam``.

    ``g`` holds samples on ``circle_grid(G)`` (shape ``(G,)`` or ``(G, p)``); the ``c_k`` come
    from one discrete transform (trapezoidal rule), which needs ``G >= 2 n``.
    """
    g = np.asarray(g)
    if g.ndim == 1:
        g = g[:, None]
    size = g.shape[0]
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if size < 2 * n:
        raise ValueError(f"grid of {size} points is too coarse for n = {n}; need at least {2 * n}")
    coef = 2 * np.pi * np.fft.ifft(g, axis=0)  # c_k (-1)^k at index k mod G
    k = np.arange(-(n - 1), n)
    weights = 1.0 - np.abs(k) / n
    sq = np.sum(np.abs(coef[np.mod(k, size)]) ** 2, axis=1)
    return float(np.sqrt(np.sum(weights * sq)))


def _grid_size(n: int) -> int:
    return 2 ** max(12, ceil(log2(4 * n)))


def empvar_cov_prediction(model: MemoryModel, family, j: int, u: int, n_j: int, n_ju: int) -> float:
    """Gaussian prediction of ``Cov(sigma_hat^2_j, sigma_hat^2_{j-u})``: ``(2 / n_ju) M_{n_j}(D_{j,u})^2``.

    The finer empirical variance is understood as the average over the ``2^u n_j``
    coefficients ``W_{j-u, 2^u k + v}``, ``k < n_j``; then the formula is exact.
    """
    if n_j < 1 or n_ju < 1:
        raise ValueError(f"coefficient counts must be >= 1, got n_j={n_j}, n_ju={n_ju}")
    dens = cross_density_on_grid(model, family, j, u, _grid_size(n_j))
    return 2.0 / n_ju * mn_functional(dens, n_j) ** 2


def empvar_limit_ratio(descriptor, d: float, u: int) -> float:
    """Large-scale limit of ``n_{j-u} Cov(sigma_hat^2_j, sigma_hat^2_{j-u}) / (sigma^2_j sigma^2_{j-u})``,
    ``4 pi ||D_{inf,u}||^2 / (2^{-2du} K^2)``."""
    k = k_constant(descriptor, d)
    return 4 * np.pi * asymptotic_sq_norm(descriptor, d, u) / (2.0 ** (-2 * d * u) * k**2)
