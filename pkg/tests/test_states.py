import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qbattery import states as S
from qbattery.dynamics import battery_state_of
from qbattery.hilbert import annihilation_op, expectation, number_op, tensor, identity
from qbattery.metrics import stored_energy

# photon distribution of the thermally averaged displaced |2>, n_th = 0.3, from an
# independent Gauss-Laguerre x angle quadrature with expm-built displacement operators
QUADRATURE_N2_NTH03 = [
    4.0964952207557269e-02, 2.1953012849690046e-01, 3.6846910660852705e-01,
    2.2052457430985450e-01, 9.6500926069698303e-02, 3.6104892511460526e-02,
    1.2288520694507728e-02, 3.9251468860744222e-03,
]


def _number_moments(state, n_max):
    n = number_op(n_max)
    mean = expectation(n, state).real
    second = expectation(n @ n, state).real
    return mean, second - mean**2


def test_fock_state():
    s = S.fock_state(0, 5)
    np.testing.assert_array_equal(s.data, [1, 0, 0, 0, 0, 0])
    mean, var = _number_moments(S.fock_state(7, 20), 20)
    assert mean == pytest.approx(7, abs=1e-14)
    assert abs(var) < 1e-12
    with pytest.raises(ValueError):
        S.Fock(-1)
    with pytest.raises(S.TruncationError):
        S.fock_state(7, 5)


def test_coherent_state_statistics():
    np.testing.assert_allclose(S.coherent_state(0, 10).data, np.eye(11)[0], atol=1e-15)
    s = S.coherent_state(math.sqrt(7), 60)
    s.check()
    mean, var = _number_moments(s, 60)
    assert abs(mean - 7) < 1e-6
    assert abs(var - 7) < 1e-4


def test_coherent_is_eigenstate_of_annihilation():
    alpha = 1.3 - 0.4j
    s = S.coherent_state(alpha, 60)
    a = annihilation_op(60)
    # away from the truncation edge a|alpha> = alpha|alpha>
    np.testing.assert_allclose((a.data @ s.data)[:40], alpha * s.data[:40], atol=1e-12)


def test_thermal_state():
    np.testing.assert_allclose(S.thermal_state(0.0, 5).data, np.diag([1, 0, 0, 0, 0, 0]), atol=0)
    s = S.thermal_state(7.0, 400)
    mean, _ = _number_moments(s, 400)
    assert abs(mean - 7) < 1e-6
    assert abs(s.purity() - 1 / 15) < 1e-6
    assert not np.any(s.data - np.diag(np.diagonal(s.data)))


def test_squeezed_vacuum():
    np.testing.assert_allclose(S.squeezed_vacuum(0.0, 0.0, 8).data, np.eye(9)[0], atol=0)
    r = math.asinh(math.sqrt(7))
    assert r == pytest.approx(1.7001, abs=1e-4)
    s = S.squeezed_vacuum(r, 0.3, 256)
    s.check()
    assert np.all(s.data[1::2] == 0)
    mean, _ = _number_moments(s, 256)
    assert abs(mean - math.sinh(r) ** 2) < 1e-4


def test_squeezed_quadrature_variance():
    # theta = 0 squeezes x = (a + a^dag)/sqrt2 to variance e^{-2r}/2
    r, n_max = 0.8, 120
    s = S.squeezed_vacuum(r, 0.0, n_max)
    a = annihilation_op(n_max).data
    x = (a + a.conj().T) / math.sqrt(2)
    var = np.vdot(s.data, x @ x @ s.data).real
    assert var == pytest.approx(math.exp(-2 * r) / 2, rel=1e-10)


def test_thermalized_limits():
    np.testing.assert_array_equal(S.thermalized_fock_populations(4, 0.0, 10), np.eye(11)[4])
    nth = 0.7
    p = S.thermalized_fock_populations(0, nth, 120)
    k = np.arange(121)
    np.testing.assert_allclose(p, nth**k / (1 + nth) ** (k + 1), rtol=1e-12, atol=1e-300)


def test_thermalized_matches_quadrature_oracle():
    p = S.thermalized_fock_populations(2, 0.3, 40)
    np.testing.assert_allclose(p[:8], QUADRATURE_N2_NTH03, atol=1e-12)
    rho = S.thermalized_fock_state(2, 0.3, 40)
    assert abs(np.trace(rho.data) - 1) < 1e-10


def test_thermalized_mean():
    p = S.thermalized_fock_populations(7, 0.5, 200)
    assert abs(np.arange(201) @ p - 7.5) < 1e-6


def test_thermalized_monte_carlo_mean(rng):
    # displaced |n> has photon mean n + |alpha|^2; alpha drawn from the thermal P-function
    nth, n = 0.5, 7
    alpha = rng.normal(scale=math.sqrt(nth / 2), size=(200_000, 2))
    mc = n + np.mean(np.sum(alpha**2, axis=1))
    p = S.thermalized_fock_populations(n, nth, 200)
    assert abs(np.arange(201) @ p - mc) < 0.01


@given(st.integers(0, 10), st.floats(1e-3, 20.0))
def test_thermalized_normalization_and_mean(n, nth):
    n_max = S.support_n_max(S.ThermalizedFock(n, nth))
    p = S.thermalized_fock_populations(n, nth, n_max, renormalize=False)
    tail = S.tail_mass(p, n_max)
    assert abs(p.sum() - 1) <= tail + 1e-12
    big = S.thermalized_fock_populations(n, nth, n_max + 400, renormalize=False)
    assert abs(np.arange(big.size) @ big - (n + nth)) < 1e-6


def test_thermalized_approaches_thermal_shape():
    def kl(nth):
        n_max = S.support_n_max(S.ThermalizedFock(1, nth)) + 50
        p = S.thermalized_fock_populations(1, nth, n_max)
        m = 1 + nth
        k = np.arange(n_max + 1)
        log_q = k * np.log(m) - (k + 1) * np.log1p(m)
        keep = p > 0
        return float(np.sum(p[keep] * (np.log(p[keep]) - log_q[keep])))

    values = [kl(t) for t in (1.0, 10.0, 100.0)]
    assert values[0] > values[1] > values[2] > 0


def test_thermalized_large_arguments_do_not_overflow():
    p = S.thermalized_fock_populations(10, 100.0, 2000)
    assert np.all(np.isfinite(p))
    assert abs(p.sum() - 1) < 1e-10


def test_tail_mass_examples():
    assert S.tail_mass(S.charger_populations(S.Fock(7), 60), 60) == 0
    assert S.tail_mass(S.charger_populations(S.Coherent(math.sqrt(7)), 60), 60) < 1e-10
    tail = S.tail_mass(S.charger_populations(S.Thermal(7.0), 60), 60)
    assert tail == pytest.approx((7 / 8) ** 56, rel=1e-9)


def test_truncation_failure_is_reported():
    with pytest.raises(S.TruncationError):
        S.thermal_state(7.0, 64)
    with pytest.raises(S.TruncationError):
        S.squeezed_vacuum(math.asinh(math.sqrt(7)), 0.0, 64)


@pytest.mark.parametrize("kind", ["coherent", "thermal", "squeezed"])
def test_equal_mean_resolution(kind):
    spec = S.charger_from_mean(kind, 7)
    n_max = S.auto_n_max(spec)
    mean = S.mean_occupation(S.charger_state(spec, n_max))
    assert abs(mean - 7) < 1e-4


def test_equal_mean_phases_are_zero():
    assert S.charger_from_mean("coherent", 7) == S.Coherent(complex(math.sqrt(7)))
    assert S.charger_from_mean("squeezed", 7).theta == 0
    with pytest.raises(ValueError):
        S.charger_from_mean("fock", 6.5)


@pytest.mark.parametrize("spec", [S.Fock(7), S.Coherent(2.0), S.Thermal(3.0),
                                  S.SqueezedVacuum(0.9), S.ThermalizedFock(7, 0.5)])
def test_joint_initial_state(spec):
    n_max = S.auto_n_max(spec)
    for ket in (True, False):
        state = S.joint_initial_state(spec, n_max, ket=ket)
        mixed = isinstance(spec, (S.Thermal, S.ThermalizedFock))
        assert state.is_ket == (ket and not mixed)
        assert state.dims == (2, n_max + 1)
        state.check()
        rho_b = battery_state_of(state.data, state.dims)
        np.testing.assert_allclose(rho_b, np.diag([1, 0]), atol=1e-12)
        assert stored_energy(rho_b) == 0


def test_joint_fock_ket_layout():
    state = S.joint_initial_state(S.Fock(7), 10)
    expected = np.zeros(22)
    expected[7] = 1  # |g> block first
    np.testing.assert_array_equal(state.data, expected)


def test_auto_truncation_covers_support():
    for spec in (S.Fock(7), S.Coherent(math.sqrt(7)), S.Thermal(7.0), S.SqueezedVacuum(1.7)):
        n_max = S.support_n_max(spec)
        assert S.tail_mass(S.charger_populations(spec, n_max), n_max) <= S.TAIL_THRESHOLD
        assert S.auto_n_max(spec) == n_max + S.DYNAMIC_MARGIN
