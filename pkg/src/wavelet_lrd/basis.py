"""Compactly supported B-spline scaling/wavelet pairs and their discrete filters.

The pair of order ``N`` is

    phi = 1_[0,1]^{*N}            shifted so that supp phi = [-N, 0]
    psi = c_N * d^N/dx^N 1_[0,1]^{*2N}   supp psi = [0, 2N]

Both are piecewise polynomials on integer knots, so the scale-``j`` filter
``h_{j,l} = 2^{-j/2} int phi(t + l) psi(2^{-j} t) dt`` is an integral of a
piecewise polynomial with integer knots and is computed exactly by
Gauss-Legendre rules on unit intervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import comb, factorial
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import BSpline
from scipy.special import zeta

__all__ = [
    "BSplineWavelet",
    "FrequencyDescriptor",
    "FilterRow",
    "FilterBank",
    "TransferDiagnostics",
    "make_bspline_family",
    "shannon_descriptor",
    "filter_coeffs",
    "filter_bank",
    "transfer_function",
    "transfer_diagnostics",
    "cardinal_bspline",
    "moment_residuals",
    "circle_grid",
]

# Relative tolerance when rebuilding h_j from its spline kernel.
DEFLATION_TOL = 1e-9


@lru_cache(maxsize=None)
def _basis_element(order: int) -> BSpline:
    return BSpline.basis_element(np.arange(order + 1, dtype=float), extrapolate=False)


def cardinal_bspline(x, order: int) -> np.ndarray:
    """Cardinal B-spline ``1_[0,1]^{*order}`` evaluated at ``x`` (zero outside ``[0, order]``)."""
    x = np.asarray(x, dtype=float)
    return np.nan_to_num(_basis_element(order)(x), nan=0.0)


def _bspline_at_integers(order: int) -> list:
    """Exact values of the cardinal B-spline of ``order`` at 0, 1, ..., order."""
    out = []
    for k in range(order + 1):
        s = Fraction(0)
        for i in range(order + 1):
            if k - i > 0:
                s += (-1) ** i * comb(order, i) * Fraction(k - i) ** (order - 1)
        out.append(s / factorial(order - 1))
    return out


def _sinc_half(xi: np.ndarray) -> np.ndarray:
    # sin(xi/2) / (xi/2), stable at 0
    return np.sinc(xi / (2 * np.pi))


@dataclass(frozen=True)
class FrequencyDescriptor:
    """Frequency-domain description of a wavelet, enough for the asymptotic spectra.

    ``psi_hat_reduced(xi) = psi_hat(xi) / |xi|**reduced_order`` lets callers form
    ``|xi|^{-2d} |psi_hat|^2`` without 0 * inf at the origin.
    ``decay_const`` bounds ``|psi_hat(xi)| <= decay_const * |xi|**-decay_exponent``
    for ``|xi| >= pi`` and drives series truncation.  ``band`` is the (lo, hi)
    range of ``|xi|`` outside of which ``psi_hat`` vanishes, if any.
    ``lattice_sum(lam, d, u)``, when present, returns the full series
    ``sum_l |xi_l|^{-2d} e_u(xi_l) conj(psi_hat(xi_l)) psi_hat(2^-u xi_l)``, ``xi_l = lam + 2 l pi``,
    in closed form with shape ``(len(lam), 2^u)``.
    """

    psi_hat: Callable[[np.ndarray], np.ndarray]
    vanishing_moments: float
    decay_exponent: float
    decay_const: float
    psi_hat_reduced: Optional[Callable[[np.ndarray], np.ndarray]] = None
    reduced_order: int = 0
    phi_hat: Optional[Callable[[np.ndarray], np.ndarray]] = None
    band: Optional[tuple] = None
    breakpoints: tuple = ()
    name: str = ""
    lattice_sum: Optional[Callable] = None

    def reduced(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.psi_hat_reduced is None:
            return np.asarray(self.psi_hat(xi), dtype=complex)
        return np.asarray(self.psi_hat_reduced(xi), dtype=complex)


def shannon_descriptor() -> FrequencyDescriptor:
    """Band-limited test wavelet with ``psi_hat = 1`` on ``[pi, 2 pi) U [-2 pi, -pi)``.

    Generates an orthonormal system, so it reproduces the closed-form ``d = 0``
    identities of the asymptotic spectra.  The half-open band makes its ``2 pi``
    translates tile the line exactly, so lattice sums are exact at every ``lam``
    including the band edges.  Frequency-only: there is no filter bank.
    """

    def psi_hat(xi):
        xi = np.asarray(xi, dtype=float)
        pos = (xi >= np.pi) & (xi < 2 * np.pi)
        neg = (xi >= -2 * np.pi) & (xi < -np.pi)
        return (pos | neg).astype(complex)

    return FrequencyDescriptor(
        psi_hat=psi_hat,
        vanishing_moments=np.inf,
        decay_exponent=np.inf,
        decay_const=0.0,
        band=(np.pi, 2 * np.pi),
        breakpoints=(np.pi, 2 * np.pi),
        name="shannon",
    )


@dataclass(frozen=True)
class BSplineWavelet:
    """B-spline scaling/wavelet pair of order ``N >= 2``.

    ``M = alpha = N`` and both supports fit in an interval of length ``T = 2N``.
    """

    order: int

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(
                f"order must be an integer >= 2 (decay exponent alpha = N must exceed 1), got {self.order}"
            )

    @property
    def vanishing_moments(self) -> int:
        return self.order

    @property
    def decay_exponent(self) -> float:
        return float(self.order)

    @property
    def support_len(self) -> int:
        return 2 * self.order

    @property
    def taps(self) -> np.ndarray:
        """Coefficients of ``(1 - z)^N``; ``psi`` is ``c_N * sum_k taps[k] B_N(x - k)``."""
        n = self.order
        return np.array([(-1) ** k * comb(n, k) for k in range(n + 1)], dtype=float)

    @cached_property
    def unnormalized_energy(self) -> Fraction:
        """Exact ``int psi_unnorm^2`` from ``int B_N(x) B_N(x + s) dx = B_2N(N + s)``."""
        n = self.order
        taps = [(-1) ** k * comb(n, k) for k in range(n + 1)]
        b2n = _bspline_at_integers(2 * n)
        total = Fraction(0)
        for k, a in enumerate(taps):
            for kk, b in enumerate(taps):
                s = n + k - kk
                if 0 <= s <= 2 * n:
                    total += a * b * b2n[s]
        return total

    @cached_property
    def psi_norm_const(self) -> float:
        return float(1.0 / np.sqrt(float(self.unnormalized_energy)))

    def phi(self, t) -> np.ndarray:
        return cardinal_bspline(np.asarray(t, dtype=float) + self.order, self.order)

    def psi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, a in enumerate(self.taps):
            out += a * cardinal_bspline(t - k, self.order)
        return self.psi_norm_const * out

    def phi_hat(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        n = self.order
        return np.exp(0.5j * n * xi) * _sinc_half(xi) ** n

    def psi_hat(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        n = self.order
        return self.psi_norm_const * (1j * xi) ** n * np.exp(-1j * n * xi) * _sinc_half(xi) ** (2 * n)

    def psi_hat_reduced(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        n = self.order
        sign = np.where(xi < 0, -1.0, 1.0)
        return self.psi_norm_const * (1j * sign) ** n * np.exp(-1j * n * xi) * _sinc_half(xi) ** (2 * n)

    def descriptor(self) -> FrequencyDescriptor:
        n = self.order
        return FrequencyDescriptor(
            psi_hat=self.psi_hat,
            vanishing_moments=n,
            decay_exponent=float(n),
            # |psi_hat| = c |xi|^N |2 sin(xi/2) / xi|^{2N} <= c 4^N |xi|^{-N}
            decay_const=self.psi_norm_const * 4.0**n,
            psi_hat_reduced=self.psi_hat_reduced,
            reduced_order=n,
            phi_hat=self.phi_hat,
            name=f"bspline{n}",
            lattice_sum=self.lattice_sum,
        )

    def lattice_sum(self, lam, d: float, u: int) -> np.ndarray:
        """Closed form of the periodised product ``|xi|^{-2d} e_u(xi) conj(psi_hat(xi)) psi_hat(2^-u xi)``.

        With ``xi = lam + 2 pi (r + 2^u m)`` every factor except ``|xi|^{-2d-2N}`` depends only
        on the residue ``r < 2^u``, and the remaining sum over ``m`` is a pair of Hurwitz zeta
        values.  The ``xi = lam`` term is kept separate so that the value at ``lam = 0`` is the
        limit ``|lam|^{2(N - d)}``-type zero rather than ``0 * inf``.
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        n = self.order
        p = 2.0 * d + 2.0 * n
        if p <= 1:
            raise ValueError(f"series diverges for d = {d} <= 1/2 - N")
        width = 2**u
        b = 2 * np.pi * width
        s1 = (2.0 * np.sin(0.5 * lam)) ** (2 * n)
        v = np.arange(width)
        total = np.zeros((lam.size, width), dtype=complex)
        for r in range(width):
            xr = lam + 2 * np.pi * r
            su = (2.0 * np.sin(xr / (2.0 * width))) ** (2 * n)
            if r == 0:
                # m = 0 term |lam|^{-p} s1 su, as |lam|^{4N-p} (s1 / lam^2N) (su / lam^2N)
                ratio1 = _sinc_half(lam) ** (2 * n)
                ratio_u = (_sinc_half(lam / width) / width) ** (2 * n)
                with np.errstate(divide="ignore", invalid="ignore"):
                    powr = np.where(lam == 0, 1.0 if p == 4 * n else 0.0, np.abs(lam) ** (4 * n - p))
                head = powr * ratio1 * ratio_u
                t = lam / b
                rest = s1 * su * b ** (-p) * (zeta(p, 1.0 + t) + zeta(p, 1.0 - t))
                z = head + rest
            else:
                t = xr / b
                z = s1 * su * b ** (-p) * (zeta(p, t) + zeta(p, 1.0 - t))
            phase = np.exp(-2j * np.pi * np.outer(np.ones_like(lam), (n + v) * r / width))
            total += z[:, None] * phase
        common = self.psi_norm_const**2 * 2.0 ** (u * n) * 2.0 ** (-u / 2)
        rot = np.exp(1j * n * lam * (1 - 1.0 / width))[:, None] * np.exp(-1j * np.outer(lam, v) / width)
        return common * rot * total


def make_bspline_family(order: int) -> BSplineWavelet:
    """B-spline pair of the given order; rejects ``order <= 1``."""
    return BSplineWavelet(order)


def _trig_eval(coeffs: np.ndarray, offset: int, lam) -> np.ndarray:
    """``sum_k coeffs[k] exp(-i lam (offset + k))`` by Horner's rule."""
    lam = np.asarray(lam, dtype=float)
    z = np.exp(-1j * lam)
    return np.exp(-1j * lam * offset) * P.polyval(z, coeffs)


def _trig_on_grid(coeffs: np.ndarray, offset: int, size: int, start: float) -> np.ndarray:
    """Same trigonometric polynomial at ``start + 2 pi i / size``, ``i < size``, via one FFT."""
    m = offset + np.arange(len(coeffs))
    x = coeffs * np.exp(-1j * start * m)
    idx = np.mod(m, size)
    folded = np.bincount(idx, weights=x.real, minlength=size) + 1j * np.bincount(
        idx, weights=x.imag, minlength=size
    )
    return np.fft.fft(folded)


def circle_grid(size: int) -> np.ndarray:
    """Uniform grid ``-pi + 2 pi g / size``, ``g = 0..size-1``."""
    return -np.pi + 2 * np.pi * np.arange(size) / size


@dataclass(frozen=True)
class FilterRow:
    """Filter ``h_{j,l}`` for one scale: ``coeffs[i] = h_{j, offset + i}``.

    ``reduced`` holds the coefficients of ``H~_j`` with the same offset, so that
    ``H_j(lam) = (1 - e^{-i lam})^M H~_j(lam)``.  ``kernel`` (offset ``kernel_offset``)
    is the positive spline kernel ``g_{j,l} = int phi(t + l) B_N(2^-j t) dt`` with

        H~_j(lam) = gain * e^{i lam N} D_j(lam)^N G_j(lam),   D_j(lam) = sum_{v < 2^j} e^{i lam v}.

    The expanded ``reduced`` coefficients grow like ``2^{jM}``; ``reduced_transfer``
    uses the factored form, which keeps full relative precision.
    """

    scale: int
    order: int
    offset: int
    coeffs: np.ndarray
    reduced: np.ndarray
    kernel: np.ndarray
    kernel_offset: int
    gain: float
    residual: float

    @property
    def last(self) -> int:
        return self.offset + len(self.coeffs) - 1

    def transfer(self, lam) -> np.ndarray:
        return _trig_eval(self.coeffs, self.offset, lam)

    def _reduced_factor(self, lam: np.ndarray) -> np.ndarray:
        n = self.order
        half = np.sin(0.5 * lam)
        width = 2.0**self.scale
        safe = np.abs(half) > 1e-300
        ratio = np.divide(np.sin(0.5 * width * lam), half, out=np.full_like(lam, width), where=safe)
        # at lam = 2 pi m the Dirichlet kernel equals 2^j
        dirichlet = np.exp(0.5j * (width - 1) * lam) * ratio
        return self.gain * np.exp(1j * n * lam) * dirichlet**n

    def reduced_transfer(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return self._reduced_factor(lam) * _trig_eval(self.kernel, self.kernel_offset, lam)

    def reduced_on_grid(self, size: int, start: float) -> np.ndarray:
        """``H~_j`` at ``start + 2 pi i / size`` for ``i < size``."""
        lam = start + 2 * np.pi * np.arange(size) / size
        return self._reduced_factor(lam) * _trig_on_grid(self.kernel, self.kernel_offset, size, start)


def _unit_interval_rule(order: int) -> tuple:
    s, w = np.polynomial.legendre.leggauss(order + 2)
    return 0.5 * (s + 1.0), 0.5 * w


def _spline_correlation(a: np.ndarray, order: int, s: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``out[i] = int phi(t + offset + i) f(t) dt`` where ``a[p, q] = f(p + s_q)`` on ``[0, P)``.

    Exact when ``f`` is a polynomial of degree <= order + 1 on each unit interval.
    The offset of the result is ``-(P + order - 1)``.
    """
    n_int = a.shape[0]
    out = np.zeros(n_int + order - 1)
    for r in range(order):
        br = w * cardinal_bspline(r + s, order)
        out[r : r + n_int] += (a @ br)[::-1]
    return out


@lru_cache(maxsize=None)
def _filter_row(order: int, j: int) -> FilterRow:
    fam = BSplineWavelet(order)
    n = order
    s, w = _unit_interval_rule(n)
    scale = 2.0 ** (-j / 2)
    step = 2**j

    # direct route: h_{j,l} = 2^{-j/2} int phi(t + l) psi(2^{-j} t) dt
    p = np.arange(2 * step * n)[:, None]
    h = scale * _spline_correlation(fam.psi((p + s[None, :]) / step), n, s, w)
    offset = -(2 * step * n + n - 1)

    # psi(2^-j t) = c sum_k taps_k B_N(2^-j t - k) is an N-th difference with step 2^j,
    # so h_l = c 2^{-j/2} sum_k taps_k g_{l + 2^j k}
    p = np.arange(step * n)[:, None]
    g = _spline_correlation(cardinal_bspline((p + s[None, :]) / step, n), n, s, w)
    g_offset = -(step * n + n - 1)
    gain = (-1) ** n * fam.psi_norm_const * scale

    dilated = np.zeros(step * n + 1)
    dilated[::step] = fam.taps[::-1]
    rebuilt = fam.psi_norm_const * scale * np.convolve(g, dilated)
    residual = float(np.max(np.abs(rebuilt - h)) / np.max(np.abs(h)))
    if residual > DEFLATION_TOL:
        raise ArithmeticError(
            f"scale-{j} filter is not an order-{n} difference of its spline kernel "
            f"(relative remainder {residual:.3g}); moment identities are broken"
        )

    # (1 - z^{2^j}) = (1 - z)(1 + ... + z^{2^j - 1}) peels off (1 - z)^N
    reduced = g
    box = np.ones(step)
    for _ in range(n):
        reduced = np.convolve(reduced, box)
    reduced = gain * reduced
    for arr in (h, reduced, g):
        arr.setflags(write=False)
    return FilterRow(
        scale=j,
        order=n,
        offset=offset,
        coeffs=h,
        reduced=reduced,
        kernel=g,
        kernel_offset=g_offset,
        gain=gain,
        residual=residual,
    )


def moment_residuals(row: FilterRow, count: int) -> np.ndarray:
    """``|sum_l h_l x_l^m| / sum_l |h_l|`` for ``m < count``, with ``x_l`` the filter positions
    centred and scaled to ``[-1, 1]``.

    Vanishing of all moments below ``count`` is invariant under affine changes of the
    position variable; the rescaling keeps the floating-point sums well conditioned.
    """
    pos = row.offset + np.arange(len(row.coeffs), dtype=float)
    centre = 0.5 * (pos[0] + pos[-1])
    half = max(0.5 * (pos[-1] - pos[0]), 1.0)
    x = (pos - centre) / half
    total = np.sum(np.abs(row.coeffs))
    return np.array([abs(np.sum(row.coeffs * x**m)) / total for m in range(count)])


def filter_coeffs(family: BSplineWavelet, j: int) -> FilterRow:
    """Exact filter ``h_{j,.}`` and its deflated companion ``h~_{j,.}`` for scale ``j >= 0``."""
    if j < 0 or int(j) != j:
        raise ValueError(f"scale index must be a non-negative integer, got {j}")
    return _filter_row(family.order, int(j))


@dataclass(frozen=True)
class FilterBank:
    """Filters for scales ``0..max_scale`` of one family."""

    family: BSplineWavelet
    rows: tuple

    @property
    def max_scale(self) -> int:
        return len(self.rows) - 1

    def __getitem__(self, j: int) -> FilterRow:
        if not 0 <= j < len(self.rows):
            raise KeyError(f"no filter for scale {j}; bank covers 0..{self.max_scale}")
        return self.rows[j]

    def __iter__(self):
        return iter(self.rows)

    def transfer(self, j: int, lam) -> np.ndarray:
        return self[j].transfer(lam)


def filter_bank(family: BSplineWavelet, max_scale: int) -> FilterBank:
    return FilterBank(family, tuple(filter_coeffs(family, j) for j in range(max_scale + 1)))


def transfer_function(bank, j: int, lam) -> np.ndarray:
    """``H_j(lam) = sum_l h_{j,l} e^{-i lam l}``; ``bank`` is a FilterBank or FilterRow."""
    row = bank if isinstance(bank, FilterRow) else bank[j]
    return row.transfer(lam)


@dataclass
class TransferDiagnostics:
    """Sup over a frequency grid of each filter-approximation error divided by its envelope.

    Columns of ``ratios`` follow ``names``; rows follow ``scales``.
    """

    scales: np.ndarray
    ratios: np.ndarray
    j0: Optional[int]
    names: tuple = ("approx", "approx_bound", "filter_bound", "square_approx")

    def column(self, name: str) -> np.ndarray:
        return self.ratios[:, self.names.index(name)]


def transfer_diagnostics(
    family: BSplineWavelet, scales: Sequence[int], grid: Optional[np.ndarray] = None
) -> TransferDiagnostics:
    """Compare ``H_j`` with ``2^{j/2} phi_hat(lam) conj(psi_hat(2^j lam))`` on a grid.

    For each scale the four ratios are

    * ``|H_j - H0_j| / (2^{j(1/2-alpha)} |lam|^M)``
    * ``|phi_hat(lam) psi_hat(2^j lam)| / (|2^j lam|^M (1 + 2^j |lam|)^{-alpha-M})``
    * ``|H_j| / (2^{j/2} |2^j lam|^M (1 + 2^j |lam|)^{-alpha-M})``
    * ``||H_j|^2 - |H0_j|^2| / (2^{j(1+M-alpha)} |lam|^{2M} (1 + 2^j |lam|)^{-alpha-M})``

    and ``j0`` is the smallest scale whose ``max |H_j|`` over a 4096-point grid exceeds 1e-8.
    """
    scales = np.asarray(list(scales), dtype=int)
    if scales.size == 0:
        raise ValueError("scales must be non-empty")
    if grid is None:
        grid = np.linspace(np.pi / 4096, np.pi, 4096)
    lam = np.asarray(grid, dtype=float)
    lam = lam[lam != 0]
    a = np.abs(lam)
    m = family.vanishing_moments
    alpha = family.decay_exponent
    out = np.empty((scales.size, 4))
    for i, j in enumerate(scales):
        hj = filter_coeffs(family, int(j)).transfer(lam)
        ph = family.phi_hat(lam)
        ps = family.psi_hat(2.0**j * lam)
        h0 = 2.0 ** (j / 2) * ph * np.conj(ps)
        x = 2.0**j * a
        tail = (1 + x) ** (-alpha - m)
        out[i, 0] = np.max(np.abs(hj - h0) / (2.0 ** (j * (0.5 - alpha)) * a**m))
        out[i, 1] = np.max(np.abs(ph * ps) / (x**m * tail))
        out[i, 2] = np.max(np.abs(hj) / (2.0 ** (j / 2) * x**m * tail))
        out[i, 3] = np.max(
            np.abs(np.abs(hj) ** 2 - np.abs(h0) ** 2) / (2.0 ** (j * (1 + m - alpha)) * a ** (2 * m) * tail)
        )
    probe = circle_grid(4096)
    j0 = None
    for j in range(0, int(scales.max()) + 1):
        if np.max(np.abs(filter_coeffs(family, j).transfer(probe))) > 1e-8:
            j0 = j
            break
    return TransferDiagnostics(scales=scales, ratios=out, j0=j0)
