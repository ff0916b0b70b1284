import numpy as np
import pytest

from qbattery import ode


def test_tableau_consistency():
    for i, row in enumerate(ode.A):
        assert sum(row) == pytest.approx(ode.C[i], abs=1e-15)
    assert ode.B.sum() == pytest.approx(1, abs=1e-15)
    assert ode.E.sum() == pytest.approx(0, abs=1e-15)
    # the continuous extension reproduces the 5th-order step at x = 1
    weights_at_one = ode.P.sum(axis=1)
    np.testing.assert_allclose(weights_at_one[:6], ode.B, atol=1e-14)
    assert weights_at_one[6] == pytest.approx(0, abs=1e-14)


def test_linear_decay_on_dense_grid():
    lam = -0.7 + 2.0j
    t = np.linspace(0, 5, 301)
    out, stats = ode.dopri5(lambda y: lam * y, np.array([1.0 + 0j]), t, rtol=1e-10, atol=1e-12)
    got = np.array([o[0] for o in out])
    np.testing.assert_allclose(got, np.exp(lam * t), atol=1e-9)
    assert stats["steps"] < 300  # dense output, not one step per grid point


def test_matrix_valued_rotation():
    gen = np.array([[0, -1], [1, 0]], dtype=complex)
    y0 = np.eye(2, dtype=complex)
    t = np.array([0.0, np.pi / 2, np.pi])
    out, _ = ode.dopri5(lambda y: gen @ y, y0, t, rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(out[0], y0)
    np.testing.assert_allclose(out[1], [[0, -1], [1, 0]], atol=1e-9)
    np.testing.assert_allclose(out[2], -y0, atol=1e-9)


def test_post_step_and_observe_hooks():
    seen = []
    out, _ = ode.dopri5(lambda y: -y, np.ones(3, complex), [0.0, 1.0],
                        observe=lambda y: float(y[0].real), post_step=lambda y: seen.append(1) or y)
    assert out[0] == 1.0
    assert out[1] == pytest.approx(np.exp(-1), abs=1e-7)
    assert seen


def test_invalid_arguments():
    with pytest.raises(ValueError):
        ode.dopri5(lambda y: y, np.ones(1), [1.0, 0.5])
    with pytest.raises(ValueError):
        ode.dopri5(lambda y: y, np.ones(1), [0.0, 1.0], rtol=0)


def test_blow_up_raises_integrator_error():
    with pytest.raises(ode.IntegratorError):
        ode.dopri5(lambda y: y**2, np.ones(1, complex), [0.0, 2.0], max_steps=10_000)
