from __future__ import annotations

from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import bspline_truncated_power, psi_unnormalized
from wavelet_lrd.basis import (
    BSplineWavelet,
    cardinal_bspline,
    circle_grid,
    filter_bank,
    filter_coeffs,
    make_bspline_family,
    moment_residuals,
    shannon_descriptor,
    transfer_diagnostics,
    transfer_function,
)
from wavelet_lrd.spectra import _lattice_truncated


@pytest.mark.parametrize("order", [1, 0, -2, 2.5])
def test_rejects_low_or_fractional_order(order):
    with pytest.raises(ValueError):
        make_bspline_family(order)


def test_family_constants():
    fam = make_bspline_family(3)
    assert fam.vanishing_moments == 3
    assert fam.decay_exponent == 3.0
    assert fam.support_len == 6


def test_order2_knots_and_normaliser():
    fam = make_bspline_family(2)
    knots = fam.psi(np.arange(5.0)) / fam.psi_norm_const
    np.testing.assert_allclose(knots, [0, 1, -2, 1, 0], atol=1e-15)
    energy, _ = quad(lambda t: psi_unnormalized(t, 2) ** 2, 0, 4, points=[1, 2, 3])
    assert energy == pytest.approx(8 / 3, rel=1e-12)
    assert fam.psi_norm_const == pytest.approx(sqrt(3 / 8), rel=1e-15)


@pytest.mark.parametrize("order", [2, 3, 4])
def test_psi_has_unit_norm(order):
    fam = make_bspline_family(order)
    pts = list(range(1, 2 * order))
    val, _ = quad(lambda t: fam.psi(t) ** 2, 0, 2 * order, points=pts, epsabs=1e-14, epsrel=1e-13)
    assert val == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("order", [2, 3, 4])
def test_bspline_matches_truncated_power(order):
    x = np.linspace(-1, order + 1, 801)
    np.testing.assert_allclose(cardinal_bspline(x, order), bspline_truncated_power(x, order), atol=1e-13)


def test_supports():
    fam = make_bspline_family(3)
    t = np.linspace(-8, 8, 3201)
    phi, psi = fam.phi(t), fam.psi(t)
    assert np.all(phi[(t < -3) | (t > 0)] == 0)
    assert np.all(psi[(t < 0) | (t > 6)] == 0)


def test_fourier_values_at_zero():
    fam = make_bspline_family(2)
    assert abs(fam.phi_hat(0.0)) == pytest.approx(1.0, abs=1e-15)
    assert abs(fam.psi_hat(0.0)) == 0.0


@pytest.mark.parametrize("m", [0, 1, 2])
def test_order3_moments_vanish(m):
    fam = make_bspline_family(3)
    # polynomial on each knot interval, so integrate piecewise
    val = sum(quad(lambda t: t**m * fam.psi(t), i, i + 1, epsabs=1e-13)[0] for i in range(6))
    assert abs(val) < 1e-10


@pytest.mark.parametrize("order", [2, 3])
def test_phi_hat_modulus_against_quadrature(order):
    fam = make_bspline_family(order)
    pts = list(range(-order + 1, 0))
    for xi in np.linspace(0.3, 12.0, 9):
        re, _ = quad(lambda t: fam.phi(t) * np.cos(xi * t), -order, 0, points=pts, epsabs=1e-13, epsrel=1e-12)
        im, _ = quad(lambda t: -fam.phi(t) * np.sin(xi * t), -order, 0, points=pts, epsabs=1e-13, epsrel=1e-12)
        closed = abs(2 * np.sin(xi / 2) / xi) ** order
        assert abs(complex(re, im)) == pytest.approx(closed, rel=1e-10)
        # the phase convention is the plain Fourier transform int phi(t) e^{-i xi t} dt
        assert complex(re, im) == pytest.approx(complex(fam.phi_hat(xi)), rel=1e-10)


@pytest.mark.parametrize("order", [2, 3])
def test_psi_hat_modulus(order):
    fam = make_bspline_family(order)
    xi = np.linspace(-20, 20, 1001)
    expect = fam.psi_norm_const * np.abs(xi) ** order * np.abs(np.sinc(xi / (2 * np.pi))) ** (2 * order)
    np.testing.assert_allclose(np.abs(fam.psi_hat(xi)), expect, rtol=1e-12, atol=1e-300)


def test_psi_hat_reduced_consistent():
    fam = make_bspline_family(3)
    xi = np.linspace(-15, 15, 301)
    xi = xi[xi != 0]
    np.testing.assert_allclose(fam.psi_hat_reduced(xi) * np.abs(xi) ** 3, fam.psi_hat(xi), rtol=1e-12, atol=1e-14)


def _h_by_quadrature(order: int, j: int, l: int) -> float:
    fam = make_bspline_family(order)
    step = 2**j
    pts = sorted({float(p) for p in range(-order - l, -l + 1)} | {float(step * q) for q in range(2 * order + 1)})
    lo, hi = max(-order - l, 0.0), min(-l, 2.0 * order * step)
    if lo >= hi:
        return 0.0
    pts = [p for p in pts if lo < p < hi]
    val, _ = quad(
        lambda t: bspline_truncated_power(t + l + order, order) * psi_unnormalized(t / step, order),
        lo,
        hi,
        points=pts or None,
        epsabs=1e-15,
        epsrel=1e-13,
        limit=200,
    )
    return fam.psi_norm_const * 2.0 ** (-j / 2) * val


def test_scale1_filter_against_adaptive_quadrature():
    row = filter_coeffs(make_bspline_family(2), 1)
    assert row.offset == -(2 * 2 * 2 + 2 - 1)
    for i, c in enumerate(row.coeffs):
        assert c == pytest.approx(_h_by_quadrature(2, 1, row.offset + i), abs=1e-13)
    # one position on each side of the stored range vanishes
    assert _h_by_quadrature(2, 1, row.offset - 1) == pytest.approx(0.0, abs=1e-15)
    assert _h_by_quadrature(2, 1, row.last + 1) == pytest.approx(0.0, abs=1e-15)


def test_scale0_energy_two_routes():
    row = filter_coeffs(make_bspline_family(2), 0)
    direct = sum(_h_by_quadrature(2, 0, row.offset + i) ** 2 for i in range(len(row.coeffs)))
    assert np.sum(row.coeffs**2) == pytest.approx(direct, rel=1e-8)


@pytest.mark.parametrize("order", [2, 3])
@pytest.mark.parametrize("j", [0, 1, 4, 7])
def test_filter_sums_to_zero_and_parseval(order, j):
    row = filter_coeffs(make_bspline_family(order), j)
    assert abs(np.sum(row.coeffs)) < 1e-12 * np.sum(np.abs(row.coeffs))
    val, _ = quad(lambda lam: abs(row.transfer(lam)) ** 2, -np.pi, np.pi, limit=2000, epsrel=1e-12)
    assert 2 * np.pi * np.sum(row.coeffs**2) == pytest.approx(val, rel=1e-8)


@pytest.mark.parametrize("order", [2, 3])
def test_moment_identities_up_to_scale8(order):
    fam = make_bspline_family(order)
    for j in range(9):
        row = filter_coeffs(fam, j)
        assert np.max(moment_residuals(row, order)) < 1e-9
        assert row.residual < 1e-9
        # moment order M is the first that does not vanish
        assert moment_residuals(row, order + 1)[order] > 1e-6


@pytest.mark.parametrize("order", [2, 3])
def test_deflation_identity_on_grid(order):
    fam = make_bspline_family(order)
    lam = circle_grid(1024)
    for j in range(0, 9):
        row = filter_coeffs(fam, j)
        lhs = row.transfer(lam)
        rhs = (1 - np.exp(-1j * lam)) ** order * row.reduced_transfer(lam)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))


def test_reduced_coefficients_are_the_quotient():
    row = filter_coeffs(make_bspline_family(2), 2)
    # (1 - z)^2 times h~ rebuilds h exactly in coefficient space
    rebuilt = np.convolve(row.reduced, [1.0, -2.0, 1.0])
    np.testing.assert_allclose(rebuilt[: len(row.coeffs)], row.coeffs, atol=1e-13)
    np.testing.assert_allclose(rebuilt[len(row.coeffs) :], 0.0, atol=1e-13)


def test_reduced_on_grid_matches_pointwise():
    row = filter_coeffs(make_bspline_family(3), 3)
    start = -0.4
    vals = row.reduced_on_grid(256, start)
    lam = start + 2 * np.pi * np.arange(256) / 256
    np.testing.assert_allclose(vals, row.reduced_transfer(lam), rtol=1e-12, atol=1e-12 * np.max(np.abs(vals)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 6), st.floats(-np.pi, np.pi), st.sampled_from([2, 3]))
def test_transfer_conjugate_symmetry(j, lam, order):
    bank = filter_bank(make_bspline_family(order), 6)
    a = transfer_function(bank, j, lam)
    b = transfer_function(bank, j, -lam)
    assert abs(a - np.conj(b)) <= 1e-12 * max(1.0, abs(a))


def test_transfer_vanishes_at_zero():
    bank = filter_bank(make_bspline_family(2), 5)
    for j in range(6):
        assert abs(bank.transfer(j, 0.0)) < 1e-13


def test_bank_rejects_missing_scale():
    bank = filter_bank(make_bspline_family(2), 2)
    with pytest.raises(KeyError):
        bank[3]
    with pytest.raises(ValueError):
        filter_coeffs(make_bspline_family(2), -1)


def test_approximation_ratios_bounded_over_scales():
    diag = transfer_diagnostics(make_bspline_family(2), range(2, 9))
    assert np.all(np.isfinite(diag.ratios))
    for name in diag.names:
        col = diag.column(name)
        assert col.max() <= 2.0 * col[0]
        # the ratios settle: the last increments shrink
        assert abs(col[-1] - col[-2]) <= abs(col[1] - col[0]) + 1e-12
    assert diag.j0 == 0


def test_bound_ratio_finite_at_nyquist():
    diag = transfer_diagnostics(make_bspline_family(2), [5], grid=np.array([np.pi]))
    assert np.isfinite(diag.column("filter_bound")[0])


def test_single_frequency_rate_constant_stable():
    fam = make_bspline_family(2)
    sup = transfer_diagnostics(fam, range(3, 9)).column("approx").max()
    lam = 0.1
    for j in range(3, 9):
        h = filter_coeffs(fam, j).transfer(lam)
        h0 = 2 ** (j / 2) * fam.phi_hat(lam) * np.conj(fam.psi_hat(2**j * lam))
        assert abs(h - h0) <= sup * 2 ** (j * (0.5 - 2)) * lam**2


@pytest.mark.parametrize("order", [2, 3])
@pytest.mark.parametrize("d", [-0.4, 0.2, 1.0])
@pytest.mark.parametrize("u", [0, 1, 2])
def test_closed_form_lattice_sum_matches_truncated_series(order, d, u):
    fam = BSplineWavelet(order)
    desc = fam.descriptor()
    lam = np.linspace(-np.pi, np.pi, 41)
    exact = fam.lattice_sum(lam, d, u)
    series = _lattice_truncated(desc, lam, d, u)
    assert exact.shape == (41, 2**u)
    np.testing.assert_allclose(exact, series, atol=1e-9 * np.max(np.abs(exact)))


def test_shannon_descriptor_band():
    desc = shannon_descriptor()
    xi = np.array([0.0, 3.0, np.pi, 5.0, 2 * np.pi, 7.0, -4.0, -np.pi, -2 * np.pi])
    np.testing.assert_array_equal(np.abs(desc.psi_hat(xi)), [0, 0, 1, 1, 0, 0, 1, 0, 1])
    # the 2 pi translates of the band tile the line: exactly one lattice point per lam
    lam = np.linspace(-np.pi, np.pi, 101)
    hits = sum(np.abs(desc.psi_hat(lam + 2 * np.pi * l)) for l in range(-3, 4))
    np.testing.assert_array_equal(hits, 1.0)
