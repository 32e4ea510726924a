import numpy as np
import pytest
from scipy.stats import kstest, t as student_t

from spincavity import (SpectralDensity, delta_from_fwhm, density_at, fwhm,
                        mhz_to_angular, normalization_constant,
                        sample_frequencies, support_window)
from spincavity.spectral import normalization_closed_form

W0 = mhz_to_angular(2689.9)
GAMMA_Q = mhz_to_angular(9.4)


def paper_density():
    return SpectralDensity.q_gaussian(W0, q=1.39, fwhm=GAMMA_Q)


def trapezoid_mass(rho, n=400001, span=None):
    """Independent high-resolution trapezoid integral of the density."""
    lo, hi = support_window(rho, 1e-10) if span is None else span
    x = np.linspace(lo, hi, n)
    return np.trapezoid(density_at(rho, x), x)


# ---------------------------------------------------------------- normalization

def test_normalization_constant_gaussian_limit():
    delta = 0.05
    c = normalization_constant(1.0001, delta)
    assert c == pytest.approx(1.0 / (delta * np.sqrt(np.pi)), rel=1e-3)


def test_normalization_constant_lorentzian_limit():
    delta = 0.05
    assert normalization_constant(2.0, delta) == pytest.approx(
        1.0 / (np.pi * delta), rel=1e-10)


def test_normalization_against_closed_form():
    for q in (1.1, 1.39, 1.7, 2.0, 2.5):
        delta = 0.0331
        assert normalization_constant(q, delta) == pytest.approx(
            normalization_closed_form(q, delta), rel=1e-10)


def test_paper_density_mass_by_trapezoid():
    rho = paper_density()
    # window integral plus the analytic power-law tail bound
    mass = trapezoid_mass(rho)
    q, delta = rho.q, rho.delta
    lo, hi = support_window(rho, 1e-10)
    x_edge = hi - rho.omega_s
    p = 2.0 / (q - 1.0)
    tail = (rho.norm_c * (q - 1.0) ** (1.0 / (1.0 - q))
            * delta ** p * x_edge ** (1.0 - p) / (p - 1.0))
    assert mass + 2.0 * tail == pytest.approx(1.0, abs=1e-9)


def exact_tail_mass(rho, x_edge):
    """Closed-form mass of one power-law tail beyond x_edge (incomplete beta)."""
    from scipy.special import beta as beta_fn, betainc
    q, delta = rho.q, rho.delta
    a = (3.0 - q) / (2.0 * (q - 1.0))
    v = 1.0 / (1.0 + (q - 1.0) * (x_edge / delta) ** 2)
    incomplete = betainc(a, 0.5, v) * beta_fn(a, 0.5)
    return rho.norm_c * delta / (2.0 * np.sqrt(q - 1.0)) * incomplete


def test_unit_mass_on_q_grid():
    # trapezoid core over +-30 widths plus the exact tail masses
    for q in (1.1, 1.39, 1.7, 2.0, 2.5):
        rho = SpectralDensity.q_gaussian(W0, q=q, delta=0.04)
        span = (W0 - 30.0 * rho.delta, W0 + 30.0 * rho.delta)
        mass = trapezoid_mass(rho, span=span) + 2.0 * exact_tail_mass(rho, 30.0 * rho.delta)
        assert mass == pytest.approx(1.0, abs=1e-9)
    rho_l = SpectralDensity.lorentzian(W0, delta=0.03)
    x = W0 + 0.03 * np.tan(np.linspace(-np.pi / 2 + 1e-7, np.pi / 2 - 1e-7, 200001))
    assert np.trapezoid(density_at(rho_l, x), x) == pytest.approx(1.0, abs=1e-9)
    rho_g = SpectralDensity.gaussian(W0, delta=0.03)
    assert trapezoid_mass(rho_g) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------- line shapes

def test_lorentzian_peak_and_half_maximum():
    delta = 0.03
    rho = SpectralDensity.lorentzian(W0, delta=delta)
    assert density_at(rho, W0) == pytest.approx(1.0 / (np.pi * delta), rel=1e-14)
    assert density_at(rho, W0 + delta) == pytest.approx(
        1.0 / (2.0 * np.pi * delta), rel=1e-14)


def test_paper_density_half_maximum_at_fwhm():
    rho = paper_density()
    peak = density_at(rho, W0)
    for sign in (+1.0, -1.0):
        val = density_at(rho, W0 + sign * GAMMA_Q / 2.0)
        assert val == pytest.approx(0.5 * peak, rel=1e-12)


def test_symmetry_at_random_offsets():
    rng = np.random.default_rng(11)
    for rho in (paper_density(), SpectralDensity.lorentzian(W0, delta=0.02),
                SpectralDensity.gaussian(W0, delta=0.02)):
        offsets = rng.uniform(0.0, 20.0 * rho.delta, size=100)
        np.testing.assert_allclose(density_at(rho, W0 + offsets),
                                   density_at(rho, W0 - offsets), rtol=1e-13)


def test_q_equals_2_matches_lorentzian_pointwise():
    delta = 0.0331
    rho_q = SpectralDensity.q_gaussian(W0, q=2.0, delta=delta)
    rho_l = SpectralDensity.lorentzian(W0, delta=delta)
    x = W0 + np.linspace(-30.0, 30.0, 1001) * delta
    np.testing.assert_allclose(density_at(rho_q, x), density_at(rho_l, x),
                               rtol=1e-12)


def test_q_near_1_matches_gaussian():
    delta = 0.0331
    rho_q = SpectralDensity.q_gaussian(W0, q=1.0 + 1e-4, delta=delta)
    rho_g = SpectralDensity.gaussian(W0, delta=delta)
    x = W0 + np.linspace(-5.0, 5.0, 501) * delta
    np.testing.assert_allclose(density_at(rho_q, x), density_at(rho_g, x),
                               rtol=1e-6)


def test_paper_tails_fall_faster_than_inverse_square():
    rho = paper_density()
    x1, x2 = 20.0 * rho.delta, 100.0 * rho.delta
    slope = (np.log(density_at(rho, W0 + x2)) - np.log(density_at(rho, W0 + x1))) \
        / (np.log(x2) - np.log(x1))
    assert slope < -2.0
    # exact tail exponent is -2/(q-1)
    assert slope == pytest.approx(-2.0 / (rho.q - 1.0), rel=0.05)


# ---------------------------------------------------------------- width algebra

def test_fwhm_lorentzian_case():
    assert fwhm(2.0, 0.25) == pytest.approx(0.5, rel=1e-14)


def test_fwhm_gaussian_limit():
    assert fwhm(1.0, 1.0) == pytest.approx(2.0 * np.sqrt(np.log(2.0)), rel=1e-12)
    assert fwhm(1.0 + 1e-9, 1.0) == pytest.approx(2.0 * np.sqrt(np.log(2.0)), rel=1e-6)


def test_fwhm_roundtrip():
    for q in (1.05, 1.39, 2.0, 2.7):
        delta = 0.7
        assert delta_from_fwhm(q, fwhm(q, delta)) == pytest.approx(delta, rel=1e-13)


def test_density_fwhm_is_half_maximum_separation():
    rho = paper_density()
    assert rho.fwhm == pytest.approx(GAMMA_Q, rel=1e-12)


# ---------------------------------------------------------------- windows

def test_support_window_lorentzian_quarter():
    rho = SpectralDensity.lorentzian(W0, delta=0.03)
    lo, hi = support_window(rho, 0.25)
    assert hi - W0 == pytest.approx(0.03 * np.sqrt(3.0), rel=1e-12)
    assert W0 - lo == pytest.approx(0.03 * np.sqrt(3.0), rel=1e-12)


def test_support_window_degenerate():
    rho = paper_density()
    lo, hi = support_window(rho, 1.0)
    assert lo == hi == W0


def test_support_window_edges_below_eps():
    rho = paper_density()
    eps = 1e-10
    lo, hi = support_window(rho, eps)
    peak = density_at(rho, W0)
    assert density_at(rho, lo) <= eps * peak * (1.0 + 1e-9)
    assert density_at(rho, hi) <= eps * peak * (1.0 + 1e-9)
    # just inside the edge the density is above the cut
    assert density_at(rho, hi - 0.01 * rho.delta) > eps * peak


# ---------------------------------------------------------------- sampling

def test_sampling_deterministic():
    rho = SpectralDensity.lorentzian(W0, delta=0.03)
    a = sample_frequencies(rho, 1, seed=42)
    b = sample_frequencies(rho, 1, seed=42)
    assert a.shape == (1,)
    assert np.array_equal(a, b)
    c = sample_frequencies(rho, 1, seed=43)
    assert not np.array_equal(a, c)


def test_gaussian_sample_standard_deviation():
    rho = SpectralDensity.gaussian(W0, delta=0.05)
    draws = sample_frequencies(rho, 100000, seed=2)
    assert np.std(draws) == pytest.approx(0.05 / np.sqrt(2.0), rel=1e-2)


def test_paper_sample_fwhm_from_histogram():
    rho = paper_density()
    draws = sample_frequencies(rho, 100000, seed=3) - W0
    edges = np.linspace(-4.0 * rho.delta, 4.0 * rho.delta, 81)
    hist, edges = np.histogram(draws, bins=edges, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * hist.max()
    above = np.flatnonzero(hist >= half)
    # linear interpolation of the two half crossings
    i0, i1 = above[0], above[-1]
    x_lo = np.interp(half, [hist[i0 - 1], hist[i0]], [centers[i0 - 1], centers[i0]])
    x_hi = np.interp(half, [hist[i1 + 1], hist[i1]], [centers[i1 + 1], centers[i1]])
    assert x_hi - x_lo == pytest.approx(GAMMA_Q, rel=0.03)


def test_q_gaussian_sampler_against_student_t():
    # the power-law family is a rescaled Student-t; its ppf is an
    # independent oracle for the tabulated inverse transform
    rho = paper_density()
    nu = (3.0 - rho.q) / (rho.q - 1.0)
    scale = rho.delta / np.sqrt(nu * (rho.q - 1.0))
    draws = sample_frequencies(rho, 20000, seed=9)
    stat = kstest((draws - W0) / scale, student_t(df=nu).cdf).statistic
    assert stat < 2.0 / np.sqrt(20000)


def test_stratified_sampling_is_noise_free():
    rho = paper_density()
    draws = sample_frequencies(rho, 4001, seed=0, stratified=True)
    assert np.all(np.diff(draws) > 0.0)
    assert np.mean(draws) == pytest.approx(W0, abs=1e-4 * rho.delta)
