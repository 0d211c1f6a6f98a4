"""Bump functions: branch values, frozen constants, derivative oracle."""

import numpy as np
import pytest

from semnav.diffeo import eta, zeta, zeta_prime


def test_zeta_nonpositive_branch():
    assert zeta(-1.0, 1.0) == 0.0
    assert zeta(0.0, 1.0) == 0.0


def test_zeta_direct_value():
    assert zeta(1.0, 1.0) == pytest.approx(np.exp(-1.0), abs=1e-15)
    assert zeta(2.0, 4.0) == pytest.approx(np.exp(-2.0), abs=1e-15)


def test_zeta_prime_matches_finite_difference():
    h = 1e-7
    for chi, mu in [(0.5, 1.0), (0.3, 2.0), (1.7, 0.5)]:
        fd = (zeta(chi + h, mu) - zeta(chi - h, mu)) / (2 * h)
        assert abs(zeta_prime(chi, mu) - fd) / abs(fd) < 1e-6


def test_zeta_prime_flat_at_zero():
    assert zeta_prime(0.0, 1.0) == 0.0
    assert zeta_prime(-2.0, 1.0) == 0.0
    # All derivatives vanish approaching zero from above.
    assert zeta_prime(1e-4, 1.0) == pytest.approx(0.0, abs=1e-300)


def test_eta_endpoints():
    assert eta(0.0, 1.0, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert eta(0.5, 1.0, 0.5) == 0.0
    assert eta(0.7, 1.0, 0.5) == 0.0
    mid = eta(0.25, 1.0, 0.5)
    assert 0.0 < mid < 1.0


def test_vectorized_shapes():
    chi = np.linspace(-1, 2, 7)
    z = zeta(chi, 1.0)
    assert z.shape == chi.shape
    assert np.all(z[chi <= 0] == 0)
    assert np.all(np.diff(z[chi > 0]) > 0)


def test_rejects_bad_mu():
    with pytest.raises(ValueError):
        zeta(1.0, 0.0)
    with pytest.raises(ValueError):
        zeta_prime(1.0, -1.0)
