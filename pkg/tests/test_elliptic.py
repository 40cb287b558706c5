import math

import numpy as np
import pytest
from scipy import special

from dynamics.DynamicsExceptions import DomainError
from dynamics.Elliptic import (K_CLAMP, K_MAX, complementary_modulus, ellint_E, ellint_F, ellint_K,
                               jacobi_sn_cn_dn)


def test_complete_integrals_at_zero_modulus():
    assert ellint_K(0.0) == pytest.approx(math.pi / 2, abs=1e-15)
    assert ellint_E(0.0) == pytest.approx(math.pi / 2, abs=1e-15)


def test_complete_integrals_match_scipy_parameter_convention(rng):
    k = rng.uniform(0.0, 0.999, 200)
    np.testing.assert_allclose(ellint_K(k), special.ellipk(k * k), rtol=1e-13)
    np.testing.assert_allclose(ellint_E(k), special.ellipe(k * k), rtol=1e-13)


def test_modulus_is_not_the_parameter():
    # K(0.5) with modulus 0.5 is K(m = 0.25), not K(m = 0.5).
    assert ellint_K(0.5) == pytest.approx(special.ellipk(0.25), rel=1e-14)
    assert ellint_K(0.5) != pytest.approx(special.ellipk(0.5), rel=1e-3)


def test_second_kind_at_unit_modulus():
    assert ellint_E(1.0) == 1.0
    assert ellint_E(K_MAX) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize('k', [K_MAX, 1.0 - 5e-13, 1.0 - 1e-13])
def test_second_kind_next_to_unit_modulus(k):
    assert ellint_E(k) == pytest.approx(special.ellipe(k * k), abs=1e-14)
    assert ellint_E(k) > 1.0


def test_scalar_in_scalar_out():
    assert isinstance(ellint_K(0.3), float)
    assert isinstance(ellint_F(0.4, 0.3), float)
    assert isinstance(ellint_K(np.array([0.3])), np.ndarray)


@pytest.mark.parametrize('k', [-0.1, 1.0, 1.5, K_MAX, float('nan')])
def test_first_kind_rejects_singular_modulus(k):
    with pytest.raises(DomainError) as error:
        ellint_K(k)
    assert error.value.name == 'k'
    assert 'modulus' in str(error.value)


def test_clamped_modulus_is_accepted():
    assert math.isfinite(ellint_K(K_CLAMP))
    assert ellint_K(K_CLAMP) > 14.0


def test_second_kind_rejects_outside_closed_interval():
    with pytest.raises(DomainError):
        ellint_E(1.0 + 1e-9)


def test_complementary_modulus():
    assert complementary_modulus(0.6) == pytest.approx(0.8, abs=1e-15)
    assert complementary_modulus(1.0) == 0.0


def test_incomplete_first_kind_matches_scipy(rng):
    phi = rng.uniform(-1.5, 1.5, 200)
    k = rng.uniform(0.0, 0.99, 200)
    np.testing.assert_allclose(ellint_F(phi, k), special.ellipkinc(phi, k * k), rtol=1e-12, atol=1e-15)


def test_incomplete_first_kind_quasi_periodicity():
    k = 0.7
    assert ellint_F(math.pi / 2, k) == pytest.approx(ellint_K(k), rel=1e-14)
    assert ellint_F(0.3 + 2 * math.pi, k) == pytest.approx(ellint_F(0.3, k) + 4 * ellint_K(k), rel=1e-14)
    assert ellint_F(-0.3, k) == pytest.approx(-ellint_F(0.3, k), rel=1e-15)


def test_jacobi_functions_match_scipy(rng):
    u = rng.uniform(-30.0, 30.0, 300)
    k = rng.uniform(0.0, 0.99, 300)
    sn, cn, dn = jacobi_sn_cn_dn(u, k)
    sn_ref, cn_ref, dn_ref, _ = special.ellipj(u, k * k)
    np.testing.assert_allclose(sn, sn_ref, atol=1e-10)
    np.testing.assert_allclose(cn, cn_ref, atol=1e-10)
    np.testing.assert_allclose(dn, dn_ref, atol=1e-10)


def test_jacobi_identities(rng):
    u = rng.uniform(-50.0, 50.0, 10_000)
    k = rng.uniform(0.0, 0.999, 10_000)
    sn, cn, dn = jacobi_sn_cn_dn(u, k)
    assert np.max(np.abs(sn ** 2 + cn ** 2 - 1.0)) <= 1e-12
    assert np.max(np.abs(dn ** 2 + k ** 2 * sn ** 2 - 1.0)) <= 1e-12


def test_jacobi_degenerates_to_circular_functions():
    sn, cn, dn = jacobi_sn_cn_dn(1.2, 0.0)
    assert sn == pytest.approx(math.sin(1.2), abs=1e-15)
    assert cn == pytest.approx(math.cos(1.2), abs=1e-15)
    assert dn == 1.0


def test_jacobi_quarter_period():
    k = 0.8
    sn, cn, _ = jacobi_sn_cn_dn(ellint_K(k), k)
    assert sn == pytest.approx(1.0, abs=1e-12)
    assert cn == pytest.approx(0.0, abs=1e-7)


def test_legendre_relation(rng):
    k = rng.uniform(0.01, 0.99, 500)
    kp = complementary_modulus(k)
    lhs = ellint_E(k) * ellint_K(kp) + ellint_E(kp) * ellint_K(k) - ellint_K(k) * ellint_K(kp)
    np.testing.assert_allclose(lhs, math.pi / 2, atol=1e-12)
