import numpy as np
import pytest

from spincavity import (DriveProtocol, amplitude_at, phase_switched_train,
                        rectangular)
from spincavity.errors import BadInterval, OutOfRange


def test_rectangular_shape():
    p = rectangular(1.0, 0.0, 800.0, 1500.0)
    assert p.segments == ((0.0, 800.0, 1.0 + 0.0j), (800.0, 1500.0, 0.0j))
    p2 = rectangular(0.5j, 100.0, 200.0, 300.0)
    assert len(p2.segments) == 3
    assert p2.segments[0][2] == 0.0


def test_rectangular_zero_amplitude_is_zero_protocol():
    p = rectangular(0.0, 0.0, 10.0, 20.0)
    assert all(eta == 0.0 for _, _, eta in p.segments)


def test_rectangular_rejects_empty_pulse():
    with pytest.raises(BadInterval):
        rectangular(1.0, 5.0, 5.0, 10.0)
    with pytest.raises(BadInterval):
        rectangular(1.0, 5.0, 4.0, 10.0)
    with pytest.raises(BadInterval):
        rectangular(1.0, 0.0, 20.0, 10.0)


def test_train_shape_and_signs():
    p = phase_switched_train(1.0, 52.0, 11, 900.0)
    assert len(p.segments) == 12
    assert p.segments[0] == (0.0, 52.0, 1.0 + 0.0j)
    assert p.segments[1][2] == -1.0
    signs = [seg[2].real for seg in p.segments[:11]]
    assert signs == [(-1.0) ** n for n in range(11)]
    assert p.segments[-1] == (572.0, 900.0, 0.0j)


def test_single_pulse_train_equals_rectangular():
    assert phase_switched_train(2.0, 30.0, 1, 100.0).segments == \
        rectangular(2.0, 0.0, 30.0, 100.0).segments


def test_train_rejects_bad_inputs():
    with pytest.raises(BadInterval):
        phase_switched_train(1.0, 0.0, 3, 100.0)
    with pytest.raises(BadInterval):
        phase_switched_train(1.0, 52.0, 0, 100.0)
    with pytest.raises(BadInterval):
        phase_switched_train(1.0, 52.0, 11, 500.0)


def test_amplitude_at():
    p = rectangular(1.0, 0.0, 800.0, 1500.0)
    assert amplitude_at(p, 400.0) == 1.0
    assert amplitude_at(p, 1000.0) == 0.0
    assert amplitude_at(p, 0.0) == 1.0
    assert amplitude_at(p, 800.0) == 0.0  # left-closed, right-open
    train = phase_switched_train(1.0, 52.0, 11, 900.0)
    assert amplitude_at(train, 60.0) == -1.0


def test_amplitude_at_out_of_range():
    p = rectangular(1.0, 0.0, 10.0, 20.0)
    with pytest.raises(OutOfRange):
        amplitude_at(p, 20.0)
    with pytest.raises(OutOfRange):
        amplitude_at(p, -1.0)


def test_amplitude_piecewise_constant():
    rng = np.random.default_rng(1)
    p = phase_switched_train(0.3 + 0.4j, 52.0, 11, 900.0)
    for a, b, eta in p.segments:
        for t in rng.uniform(a, b, size=5):
            assert amplitude_at(p, t) == eta


def test_net_power_equality():
    # same mean |eta|^2 for a train and a rectangular pulse of equal span
    tau, n = 52.0, 11
    span = tau * n
    train = phase_switched_train(0.7, tau, n, span)
    rect = rectangular(0.7, 0.0, span, span)

    def mean_power(p):
        total = sum((b - a) * abs(eta) ** 2 for a, b, eta in p.segments)
        return total / (p.t_end - p.t_start)

    assert mean_power(train) == pytest.approx(mean_power(rect), rel=1e-14)


def test_contiguity_enforced():
    with pytest.raises(BadInterval):
        DriveProtocol(((0.0, 1.0, 1.0), (2.0, 3.0, 1.0)))
    with pytest.raises(BadInterval):
        DriveProtocol(())
