from __future__ import annotations

import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from wavelet_lrd.basis import circle_grid, filter_coeffs, make_bspline_family, shannon_descriptor
from wavelet_lrd.models import arfima, custom, fbm, fgn, white_noise
from wavelet_lrd.simulate import fgn_autocovariance
from wavelet_lrd.spectra import (
    QuadratureWarning,
    asymptotic_sq_norm,
    cross_density_asymptotic,
    cross_density_exact,
    cross_density_on_grid,
    empvar_cov_prediction,
    empvar_limit_ratio,
    k_constant,
    mn_functional,
    wavelet_cov,
    wavelet_variance,
)

FAM2 = make_bspline_family(2)


def _filter_autocorr(h: np.ndarray, lag: int) -> float:
    if lag >= h.size:
        return 0.0
    return float(np.dot(h[: h.size - lag], h[lag:]))


@pytest.mark.parametrize("j", [0, 1, 3, 5])
def test_white_noise_variance_is_filter_energy(j):
    h = filter_coeffs(FAM2, j).coeffs
    assert wavelet_variance(white_noise(1.7), FAM2, j) == pytest.approx(2 * np.pi * 1.7 * np.sum(h**2), rel=1e-10)


def test_fgn_covariance_against_time_domain():
    # Cov(W_{j,k}, W_{j2,k2}) = sum_{l,l'} h_{j, 2^j k - l} h_{j2, 2^j2 k2 - l'} gamma(l - l')
    m = fgn(0.7)
    for j, k, j2, k2 in [(2, 0, 2, 0), (2, 0, 2, 3), (3, 1, 2, 1), (3, 0, 1, 5)]:
        a, b = filter_coeffs(FAM2, j), filter_coeffs(FAM2, j2)
        la = 2**j * k - (a.offset + np.arange(a.coeffs.size))
        lb = 2**j2 * k2 - (b.offset + np.arange(b.coeffs.size))
        lags = np.abs(la[:, None] - lb[None, :])
        gam = fgn_autocovariance(0.7, int(lags.max()))
        direct = a.coeffs @ gam[lags] @ b.coeffs
        assert wavelet_cov(m, FAM2, j, k, j2, k2) == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_within_scale_stationarity():
    m = arfima(0.3, ar=[0.5])
    base = [wavelet_cov(m, FAM2, 2, k, 2, k + 2) for k in range(4)]
    np.testing.assert_allclose(base, base[0], rtol=1e-10)


def test_quadrature_reports_error():
    q = wavelet_variance(fgn(0.9), FAM2, 4, full_output=True)
    assert 0 <= q.error <= 1e-8 * q.value


def test_nonstationary_models_need_enough_moments():
    model = custom(2.6, lambda lam: np.ones_like(lam))
    with pytest.raises(ValueError, match="M >= K"):
        wavelet_variance(model, FAM2, 2)
    # FBM (d = 1.2) is fine with two vanishing moments
    assert wavelet_variance(fbm(0.7), FAM2, 2) > 0


@pytest.mark.parametrize("model", [fgn(0.7), arfima(0.45), arfima(-0.3), fbm(0.6)], ids=lambda m: m.describe())
def test_variances_positive(model):
    for j in range(0, 7):
        assert wavelet_variance(model, FAM2, j) > 0


def test_density_integrates_to_variance():
    for model in (fgn(0.7), arfima(0.4, ma=[0.5])):
        for j in (1, 3, 5):
            val, _ = quad(
                lambda lam: cross_density_exact(model, FAM2, j, 0, lam).real[0, 0], -np.pi, np.pi, limit=500, epsrel=1e-11
            )
            assert val == pytest.approx(wavelet_variance(model, FAM2, j), rel=1e-6)


def test_white_noise_two_term_density():
    lam = np.linspace(-np.pi, np.pi, 33)
    row = filter_coeffs(FAM2, 1)
    direct = sum(0.5 * np.abs(row.transfer((lam + 2 * np.pi * l) / 2)) ** 2 for l in range(2))
    dens = cross_density_exact(white_noise(1.0), FAM2, 1, 0, lam)[:, 0]
    np.testing.assert_allclose(dens.real, direct, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(dens.imag, 0.0, atol=1e-14)
    # its Fourier coefficients are the autocovariances of W_{1,.}
    for tau in range(4):
        val, _ = quad(
            lambda x: np.cos(x * tau) * cross_density_exact(white_noise(1.0), FAM2, 1, 0, x).real[0, 0],
            -np.pi,
            np.pi,
            limit=400,
            epsrel=1e-12,
        )
        assert val == pytest.approx(2 * np.pi * _filter_autocorr(row.coeffs, 2 * tau), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("u", [0, 1, 2])
def test_density_is_fourier_transform_of_covariances(u):
    model = fgn(0.7)
    j = 3
    for v in range(2**u):
        for tau in (-2, 0, 1, 3):
            val, _ = quad(
                lambda x: np.real(np.exp(1j * x * tau) * cross_density_exact(model, FAM2, j, u, x)[0, v]),
                -np.pi,
                np.pi,
                limit=500,
                epsrel=1e-11,
            )
            # Cov(W_{j,k}, W_{j-u, 2^u k' + v}) with k - k' = tau
            expect = wavelet_cov(model, FAM2, j, tau + 2, j - u, 2**u * 2 + v)
            assert val == pytest.approx(expect, rel=1e-7, abs=1e-9 * wavelet_variance(model, FAM2, j))


def test_grid_matches_exact():
    model = arfima(0.2, ar=[0.3])
    lam = circle_grid(128)
    for u in (0, 1, 2):
        grid = cross_density_on_grid(model, FAM2, 4, u, 128)
        exact = cross_density_exact(model, FAM2, 4, u, lam)
        np.testing.assert_allclose(grid, exact, atol=1e-12 * np.max(np.abs(exact)))


def test_conjugate_symmetry():
    lam = np.linspace(0.01, np.pi, 50)
    for u in (0, 1, 2):
        a = cross_density_exact(fgn(0.7), FAM2, 4, u, lam)
        b = cross_density_exact(fgn(0.7), FAM2, 4, u, -lam)
        np.testing.assert_allclose(a, np.conj(b), atol=1e-13 * np.max(np.abs(a)))
        c = cross_density_asymptotic(FAM2.descriptor(), 0.2, u, lam)
        d = cross_density_asymptotic(FAM2.descriptor(), 0.2, u, -lam)
        np.testing.assert_allclose(c, np.conj(d), atol=1e-13 * np.max(np.abs(c)))


def test_lag_bigger_than_scale_rejected():
    with pytest.raises(ValueError):
        cross_density_exact(fgn(0.7), FAM2, 1, 2, np.array([0.5]))


# ---- asymptotic quantities -------------------------------------------------------------


def test_shannon_golden_values():
    desc = shannon_descriptor()
    assert k_constant(desc, 0.0) == pytest.approx(2 * np.pi, rel=1e-12)
    lam = np.linspace(-np.pi, np.pi, 101)
    np.testing.assert_allclose(cross_density_asymptotic(desc, 0.0, 0, lam)[:, 0], 1.0, atol=1e-12)
    for u in (1, 2):
        np.testing.assert_allclose(cross_density_asymptotic(desc, 0.0, u, lam), 0.0, atol=1e-12)


def test_shannon_k_at_half():
    assert k_constant(shannon_descriptor(), 0.5) == pytest.approx(2 * np.log(2), rel=1e-10)


def _k_log_trapezoid(d: float, order: int = 2) -> float:
    fam = make_bspline_family(order)
    s = np.linspace(-40.0, np.log(2e4), 4_000_001)
    xi = np.exp(s)
    vals = xi ** (1 - 2 * d) * np.abs(fam.psi_hat(xi)) ** 2
    body = np.sum(vals) - 0.5 * (vals[0] + vals[-1])
    return 2 * body * (s[1] - s[0])


def test_k_constant_against_log_grid_trapezoid():
    assert k_constant(FAM2.descriptor(), 0.2) == pytest.approx(_k_log_trapezoid(0.2), rel=1e-6)


@pytest.mark.parametrize("order", [2, 3])
def test_k_constant_unit_norm_at_zero(order):
    assert k_constant(make_bspline_family(order).descriptor(), 0.0) == pytest.approx(2 * np.pi, rel=1e-8)


@pytest.mark.parametrize("d", [-0.4, 0.0, 0.2, 0.45, 1.0])
def test_asymptotic_density_integrates_to_k(d):
    desc = FAM2.descriptor()
    val, _ = quad(lambda x: cross_density_asymptotic(desc, d, 0, x).real[0, 0], -np.pi, np.pi, limit=400, epsrel=1e-11)
    assert val == pytest.approx(k_constant(desc, d), rel=1e-6)


def test_asymptotic_scalar_density_nonnegative():
    lam = np.linspace(-np.pi, np.pi, 201)
    v = cross_density_asymptotic(FAM2.descriptor(), 0.3, 0, lam)[:, 0]
    assert np.all(v.real >= 0)
    np.testing.assert_allclose(v.imag, 0, atol=1e-15 * np.max(v.real))


def test_asymptotic_range_checks():
    desc = FAM2.descriptor()
    with pytest.raises(ValueError):
        cross_density_asymptotic(desc, 2.1, 0, np.array([0.5]))
    with pytest.raises(ValueError):
        cross_density_asymptotic(desc, -1.6, 0, np.array([0.5]), beta=2.0)
    with pytest.raises(ValueError):
        k_constant(desc, 2.5)
    assert k_constant(desc, 2.3) > 0


@pytest.mark.parametrize("u", [0, 1, 2])
def test_sq_norm_continuous_in_d(u):
    desc = FAM2.descriptor()
    ds = np.arange(-0.2, 1.01, 0.1)
    norms = np.array([asymptotic_sq_norm(desc, d, u) for d in ds])
    assert np.all(np.isfinite(norms)) and np.all(norms > 0)
    close = np.array([asymptotic_sq_norm(desc, d + 1e-3, u) for d in ds])
    assert np.max(np.abs(close / norms - 1)) < 0.01


def test_limit_ratio_structure():
    desc = FAM2.descriptor()
    r0 = empvar_limit_ratio(desc, 0.2, 0)
    assert r0 == pytest.approx(4 * np.pi * asymptotic_sq_norm(desc, 0.2, 0) / k_constant(desc, 0.2) ** 2)
    assert empvar_limit_ratio(shannon_descriptor(), 0.0, 0) == pytest.approx(2.0, rel=1e-10)


# ---- M_n functional and empirical-variance covariances ----------------------------------


def test_mn_constant():
    for n in (1, 5, 100):
        assert mn_functional(np.ones(4096), n) == pytest.approx(2 * np.pi, rel=1e-13)


def test_mn_single_harmonic():
    g = np.exp(1j * circle_grid(4096))
    for n in (1, 2, 7, 300):
        assert mn_functional(g, n) ** 2 == pytest.approx((2 * np.pi) ** 2 * (1 - 1 / n), abs=1e-10)


def test_mn_limit_is_l2_norm():
    desc = FAM2.descriptor()
    g = cross_density_asymptotic(desc, 0.2, 0, circle_grid(2**15))
    l2, _ = quad(lambda x: abs(cross_density_asymptotic(desc, 0.2, 0, x)[0, 0]) ** 2, -np.pi, np.pi, epsrel=1e-12)
    assert mn_functional(g, 10_000) == pytest.approx(np.sqrt(2 * np.pi * l2), rel=1e-3)


def test_mn_rejects_coarse_grid():
    with pytest.raises(ValueError):
        mn_functional(np.ones(100), 51)


def test_empvar_white_noise_direct_sum():
    n = 300
    h = filter_coeffs(FAM2, 0).coeffs
    gam = np.array([2 * np.pi * _filter_autocorr(h, t) for t in range(n)])
    tau = np.arange(-(n - 1), n)
    direct = 2 / n * np.sum((1 - np.abs(tau) / n) * gam[np.abs(tau)] ** 2)
    assert empvar_cov_prediction(white_noise(1.0), FAM2, 0, 0, n, n) == pytest.approx(direct, rel=1e-10)


def test_empvar_nonnegative():
    for u in (0, 1, 2):
        assert empvar_cov_prediction(arfima(0.3), FAM2, 4, u, 200, 400) >= 0


def test_spectral_radius_bound():
    model = fgn(0.8)
    for j in (1, 3):
        covs = [wavelet_cov(model, FAM2, j, 0, j, t) for t in range(40)]
        eig = np.linalg.eigvalsh(covs[0] * np.eye(40) + sum(np.diag([c] * (40 - t), t) + np.diag([c] * (40 - t), -t) for t, c in enumerate(covs) if t))
        sup = np.max(cross_density_on_grid(model, FAM2, j, 0, 4096).real)
        assert eig.max() <= 2 * np.pi * sup + 1e-6


def test_quadrature_warning_class():
    assert issubclass(QuadratureWarning, RuntimeWarning)
    with warnings.catch_warnings():
        warnings.simplefilter("error", QuadratureWarning)
        wavelet_variance(arfima(0.45), FAM2, 8)
