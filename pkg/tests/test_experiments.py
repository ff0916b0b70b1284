import math

import numpy as np
import pytest

from qbattery import experiments as X
from qbattery import states as S
from qbattery.config import SimConfig
from qbattery.metrics import ChargingSummary


@pytest.fixture(scope="module")
def cfg():
    return SimConfig.from_dict()


@pytest.fixture(scope="module")
def fock(cfg):
    return X.fock_sweep(cfg, workers=1)


@pytest.fixture(scope="module")
def comparison(cfg):
    return X.gaussian_comparison(cfg, workers=1)


def test_fock_sweep_shape(fock):
    assert fock.axes == {"n": list(range(1, 11))}
    assert len(fock.rows()) == 10
    assert all(isinstance(r, ChargingSummary) for r in fock.records)
    for row in fock.rows():
        n, e_max, tau_c, p_bar, xi_max, eta = row
        assert p_bar * tau_c == pytest.approx(e_max, rel=1e-15)
        assert 0 < tau_c <= 2 * math.pi
        assert 0 <= xi_max <= e_max + 1e-9


def test_fock_sweep_endpoint_and_plateau(fock):
    by_n = dict(zip(fock.axes["n"], fock.records))
    assert by_n[7].e_max >= 0.99
    assert abs(by_n[7].tau_c - math.pi) / math.pi <= 0.04
    plateau = [by_n[n].e_max for n in (7, 8, 9, 10)]
    assert max(plateau) - min(plateau) < 0.01
    for n in range(1, 7):
        assert abs(by_n[n].tau_c - math.pi) / math.pi <= 0.1


def test_sweep_result_checks_record_count():
    with pytest.raises(ValueError):
        X.SweepResult("x", {"a": [1, 2], "b": [1, 2, 3]}, [0.0] * 5, ("a", "b", "v"))


def test_parallel_and_serial_tables_identical(cfg):
    small = cfg.replace(n_range=[3, 5])
    serial = X.fock_sweep(small, workers=1).rows()
    parallel = X.fock_sweep(small, workers=2).rows()
    assert serial == parallel


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("QBATTERY_THREADS", "3")
    assert X.worker_count() == 3
    monkeypatch.setenv("QBATTERY_THREADS", "zero")
    with pytest.raises(ValueError):
        X.worker_count()
    monkeypatch.delenv("QBATTERY_THREADS")
    assert X.worker_count() >= 1


def test_comparison_equal_means(comparison):
    assert set(comparison.series) == {"fock", "coherent", "thermal", "squeezed"}
    for kind, mean in comparison.initial_means.items():
        assert abs(mean - 7) < 1e-3, kind


def test_comparison_coherence_and_snr(comparison):
    s = comparison.summaries
    for kind in ("fock", "coherent"):
        assert s[kind].r_norm_at_tau_c >= 0.99
        assert s[kind].snr_at_tau_c > 1
    for kind in ("thermal", "squeezed"):
        assert s[kind].r_norm_at_tau_c < 0.99
        assert np.all(comparison.series[kind].snr <= 1)
    assert len(comparison.summary_rows()) == 4


def test_bloch_norm_series(cfg):
    series = X.bloch_norm_series(cfg, workers=1)
    for kind, (t, r) in series.items():
        assert r[0] == pytest.approx(1, abs=1e-12)
        assert np.all((r >= 0) & (r <= 1 + 1e-10))
        assert r[(t > 0) & (t < t[-1])].min() < 1
    assert series["fock"][1][-1] >= 0.99


def test_wigner_snapshots(cfg):
    snaps = X.wigner_snapshots(cfg)
    assert set(snaps) == {"fock", "coherent", "thermal", "squeezed"}
    def purity(rho):
        return np.trace(rho @ rho).real
    assert purity(snaps["fock"]["battery"]) >= 0.99
    assert purity(snaps["thermal"]["battery"]) < 0.99
    for snap in snaps.values():
        w = snap["W"]
        assert w.shape == (201, 201) and np.isrealobj(w)
        dx = snap["x"][1] - snap["x"][0]
        assert abs(w.sum() * dx * dx - 1) < 1e-3


def test_thermal_sweep_small_grid(cfg):
    res = X.thermal_broadening_sweep(cfg, n_values=[1, 7], n_th_values=[1e-3, 0.5], workers=1)
    assert res.axes == {"n": [1, 7], "n_th": [1e-3, 0.5]}
    table = {(n, t): xi for n, t, xi in res.rows()}
    assert table[(7, 1e-3)] >= 0.99
    assert table[(1, 0.5)] < table[(1, 1e-3)]


def test_thermal_sweep_low_fock_profile(cfg):
    # the low-n profile falls with n_th and should then stay flat
    grid = np.geomspace(1e-3, 30, 12)
    res = X.thermal_broadening_sweep(cfg, n_values=[2], n_th_values=grid, workers=1)
    xi = np.array([r[2] for r in res.rows()])
    k = int(np.argmin(xi))
    assert k > 0 and np.all(np.diff(xi[:k + 1]) <= 1e-9)
    assert xi[k:].max() - xi[k:].min() <= 0.03


def test_dissipation_weak_loss_keeps_ergotropy(cfg):
    res = X.dissipation_sweep(cfg, n_values=[7], gamma_values=[1e-3], workers=1)
    assert res.records[0] >= 0.98


def test_dissipation_sweep_small_grid(cfg):
    gammas = [1e-2, 1.0, 30.0]
    res = X.dissipation_sweep(cfg, n_values=[2, 5], gamma_values=gammas, workers=1)
    assert len(res.rows()) == 6
    for n in (2, 5):
        xi = [r[2] for r in res.rows() if r[0] == n]
        assert all(b <= a + 1e-3 for a, b in zip(xi, xi[1:]))
        assert xi[-1] < 0.02


def test_heatmap_small_grid(cfg):
    res = X.thermal_dissipation_heatmap(cfg, n_th_values=[1e-3, 0.1], gamma_values=[0.0, 30.0], workers=1)
    table = {(t, g): xi for t, g, xi in res.rows()}
    assert res.columns == ("n_th", "gamma", "xi_max")
    assert table[(1e-3, 30.0)] < 0.02 and table[(0.1, 30.0)] < 0.02
    # gamma = 0 cells reproduce the unitary sweep exactly
    uni = X.thermal_broadening_sweep(cfg, n_values=[7], n_th_values=[1e-3, 0.1], workers=1)
    assert table[(1e-3, 0.0)] == pytest.approx(uni.records[0], abs=1e-9)
    assert table[(0.1, 0.0)] == pytest.approx(uni.records[1], abs=1e-9)


def test_heatmap_weak_loss_corner(cfg):
    res = X.thermal_dissipation_heatmap(cfg, n_th_values=[1e-3], gamma_values=[1e-3], workers=1)
    assert res.records[0] >= 0.98


def test_beat_analysis(cfg):
    rows = {r.n: r for r in X.beat_analysis(cfg)}
    assert rows[2].delta_omega == 0 and rows[2].beat_period == math.inf
    assert rows[7].beat_period == pytest.approx(0.8192, abs=1e-4)
    for n, r in rows.items():
        assert r.reference_period == math.pi
        assert abs(r.delta_omega - 2 * abs(math.sqrt(n) - math.sqrt(n * (n - 1)))) < 1e-12
        assert r.empirical_period > 0
    detuned = X.beat_analysis(cfg, n_values=[3], delta1=0.2)
    assert math.isnan(detuned[0].empirical_period)


def test_local_max_period():
    t = np.linspace(0, 10, 1001)
    assert X.local_max_period(t, np.cos(2 * np.pi * t / 1.25)) == pytest.approx(1.25, abs=0.011)
    assert math.isnan(X.local_max_period(t, t))


def test_simulate_truncation_error(cfg):
    with pytest.raises(S.TruncationError):
        X.simulate(cfg.replace(n_max=10), S.Thermal(7.0))


def test_simulate_vacuum_is_exactly_empty(cfg):
    sim = X.simulate(cfg, S.Fock(0))
    assert np.all(sim.series.energy == 0)
    assert np.all(np.isneginf(sim.series.snr))
