import numpy as np
import pytest

from spincavity import (CavityTrajectory, SystemParams, TimeGrid,
                        angular_to_mhz, mhz_to_angular, paper_params, validate)
from spincavity.errors import NegativeRate, NonFinite, NonPositiveFrequency


def test_mhz_to_angular_values():
    assert mhz_to_angular(0.0) == 0.0
    assert mhz_to_angular(1000.0) == pytest.approx(2.0 * np.pi, rel=1e-15)
    assert mhz_to_angular(8.6) == pytest.approx(2.0 * np.pi * 8.6e-3, rel=1e-15)


def test_mhz_to_angular_linearity():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a, b = rng.uniform(0.0, 5000.0, size=2)
        assert mhz_to_angular(a + b) == pytest.approx(
            mhz_to_angular(a) + mhz_to_angular(b), rel=1e-14, abs=1e-18)


def test_angular_roundtrip():
    assert angular_to_mhz(mhz_to_angular(17.2)) == pytest.approx(17.2, rel=1e-14)


def test_paper_params_values():
    p = paper_params()
    assert p.Omega == pytest.approx(mhz_to_angular(8.6), rel=1e-15)
    assert p.kappa == pytest.approx(mhz_to_angular(0.4), rel=1e-15)
    assert p.gamma == 0.0
    assert p.omega_c == p.omega_s == p.omega_p
    assert p.omega_c == pytest.approx(mhz_to_angular(2689.9), rel=1e-15)
    assert p.kappa_fwhm == pytest.approx(2.0 * p.kappa, rel=1e-15)


def test_validate_passes_and_is_idempotent():
    p = paper_params()
    assert validate(p) is p
    assert validate(validate(p)) == validate(p)


def test_validate_rejects_negative_rate():
    p = paper_params()
    bad = SystemParams(p.omega_c, p.omega_s, p.omega_p, -1.0, p.gamma, p.Omega)
    with pytest.raises(NegativeRate):
        validate(bad)


def test_validate_rejects_nonpositive_frequency():
    p = paper_params()
    bad = SystemParams(0.0, p.omega_s, p.omega_p, p.kappa, p.gamma, p.Omega)
    with pytest.raises(NonPositiveFrequency):
        validate(bad)


def test_time_grid_sample_count():
    grid = TimeGrid(0.0, 800.0, 0.05)
    assert grid.n_samples == 16001
    t = grid.times()
    assert t[0] == 0.0
    assert t[-1] == pytest.approx(800.0, abs=1e-9)
    assert np.allclose(np.diff(t), 0.05)


def test_time_grid_rejects_bad_spacing():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 100.0, 0.0)
    with pytest.raises(ValueError):
        TimeGrid(100.0, 100.0, 0.1)


def test_trajectory_checks_length_and_finiteness():
    grid = TimeGrid(0.0, 1.0, 0.5)
    CavityTrajectory(grid, np.zeros(3, dtype=complex))
    with pytest.raises(ValueError):
        CavityTrajectory(grid, np.zeros(4, dtype=complex))
    with pytest.raises(NonFinite):
        CavityTrajectory(grid, np.array([0.0, np.nan, 0.0], dtype=complex))


def test_cavity_rate_is_complex_in_detuned_frame():
    p = paper_params()
    detuned = SystemParams(p.omega_c, p.omega_s, p.omega_c + 0.01,
                           p.kappa, p.gamma, p.Omega)
    assert detuned.cavity_rate == pytest.approx(p.kappa - 0.01j)
