"""Figure-level studies as deterministic sweeps over independent grid points.

Each grid point (or group of points sharing one Hamiltonian diagonalization)
is a side-effect-free job; jobs run serially or in worker processes and the
results are assembled in axis order, so output never depends on scheduling.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from . import states
from .config import SimConfig
from .dynamics import (HamiltonianSpec, SpectralPropagator, build_total_hamiltonian,
                       lindblad_evolve, rabi_analysis)
from .metrics import ChargingSummary, MetricSeries, charging_summary, wigner

GAUSSIAN_KINDS = ("fock", "coherent", "thermal", "squeezed")
MEAN_TOL = 1e-3


def worker_count() -> int:
    raw = os.environ.get("QBATTERY_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"QBATTERY_THREADS must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"QBATTERY_THREADS must be a positive integer, got {raw!r}")
        return n
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def parallel_map(fn: Callable, jobs: Sequence, workers: int | None = None) -> list:
    """Ordered map; uses worker processes when more than one worker is allowed."""
    workers = worker_count() if workers is None else workers
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, *zip(*jobs)))


@dataclass
class SweepResult:
    kind: str
    axes: dict[str, list]
    records: list
    columns: tuple[str, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = math.prod(len(v) for v in self.axes.values())
        if len(self.records) != expected:
            raise ValueError(f"{len(self.records)} records for a grid of {expected} points")

    def rows(self) -> list[tuple]:
        out = []
        for point, rec in zip(itertools.product(*self.axes.values()), self.records):
            if isinstance(rec, ChargingSummary):
                vals = (rec.e_max, rec.tau_c, rec.p_bar, rec.xi_max, rec.eta_at_tau_c)
            elif isinstance(rec, tuple):
                vals = rec
            else:
                vals = (rec,)
            out.append(tuple(point) + tuple(vals))
        return out


def _provenance(cfg: SimConfig, start: float, **extra) -> dict:
    prov = {"config": cfg.doc, "version": __version__,
            "integrator": {"rel_tol": cfg.integrator_rel_tol, "abs_tol": cfg.abs_tol},
            "wall_time_s": round(time.perf_counter() - start, 3)}
    prov.update(extra)
    return prov


# --- single trajectories ---

@dataclass
class Simulation:
    charger: states.ChargerSpec
    n_max: int
    series: MetricSeries
    battery_at: Callable[[float], np.ndarray]
    initial_mean: float
    trajectory: Any = None


def resolve_n_max(cfg: SimConfig, charger: states.ChargerSpec) -> int:
    if cfg.n_max == "auto":
        return states.auto_n_max(charger, cfg.tail_tol)
    return int(cfg.n_max)


def hamiltonian_spec(cfg: SimConfig, n_max: int) -> HamiltonianSpec:
    return HamiltonianSpec(n_max=n_max, g1=cfg.g1, g2=cfg.g2, frame=cfg.frame,
                           omega_c=cfg.omega_c, omega_q=cfg.omega_q)


def _is_pure(charger: states.ChargerSpec) -> bool:
    return isinstance(charger, (states.Fock, states.Coherent, states.SqueezedVacuum))


def simulate(cfg: SimConfig, charger: states.ChargerSpec | None = None, n_max: int | None = None,
             gamma: float | None = None, times=None,
             propagator: SpectralPropagator | None = None) -> Simulation:
    """Propagate one charger and evaluate every battery metric on the time grid.

    Energies are reported in units of the qubit splitting.
    """
    charger = cfg.charger if charger is None else charger
    gamma = cfg.gamma if gamma is None else gamma
    n_max = resolve_n_max(cfg, charger) if n_max is None else n_max
    times = cfg.times if times is None else np.asarray(times, dtype=float)
    spec = hamiltonian_spec(cfg, n_max)
    if gamma == 0:
        state0 = states.joint_initial_state(charger, n_max, cfg.tail_tol, ket=_is_pure(charger))
        prop = propagator or SpectralPropagator.from_spec(spec)
        traj = prop.evolve(state0, times)

        def battery_at(t: float) -> np.ndarray:
            return traj.battery_at([t])[0]
    else:
        state0 = states.joint_initial_state(charger, n_max, cfg.tail_tol, ket=False)
        H = build_total_hamiltonian(spec)
        kw = dict(rtol=cfg.integrator_rel_tol, atol=cfg.abs_tol)
        traj = lindblad_evolve(H, gamma, state0, times, **kw)

        def battery_at(t: float) -> np.ndarray:
            return lindblad_evolve(H, gamma, state0, [0.0, t], **kw).battery[-1]
    series = MetricSeries.from_battery_states(times, traj.battery_states(), omega_q=1.0)
    mean = states.mean_occupation(states.charger_state(charger, n_max, cfg.tail_tol))
    return Simulation(charger, n_max, series, battery_at, mean, traj)


def charge(cfg: SimConfig) -> Simulation:
    return simulate(cfg)


# --- Fock sweep ---

def _fock_point(cfg: SimConfig, n: int) -> tuple[ChargingSummary, int]:
    sim = simulate(cfg, states.Fock(n))
    summary = charging_summary(sim.series, refine=cfg.refine, battery_at=sim.battery_at)
    return summary, sim.n_max


def fock_sweep(cfg: SimConfig | None = None, n_values: Iterable[int] | None = None,
               workers: int | None = None) -> SweepResult:
    """Charging summary (E_max, tau_c, mean power, peak ergotropy) per Fock charger."""
    cfg = cfg or SimConfig.from_dict()
    start = time.perf_counter()
    n_values = list(cfg.n_values if n_values is None else n_values)
    out = parallel_map(_fock_point, [(cfg, n) for n in n_values], workers)
    return SweepResult(
        "fock", {"n": n_values}, [s for s, _ in out],
        ("n", "E_max", "tau_c", "P_bar", "xi_max", "eta_at_tau_c"),
        _provenance(cfg, start, n_max={str(n): m for n, (_, m) in zip(n_values, out)}),
    )


# --- equal-mean charger comparison ---

def equal_mean_chargers(mean_n: float) -> dict[str, states.ChargerSpec]:
    return {kind: states.charger_from_mean(kind, mean_n) for kind in GAUSSIAN_KINDS}


def _checked_mean(sim: Simulation, target: float) -> None:
    if abs(sim.initial_mean - target) > MEAN_TOL:
        raise states.TruncationError(
            f"{states.charger_label(sim.charger)}: mean occupation {sim.initial_mean:.6g} "
            f"differs from {target:g} at n_max={sim.n_max}")


def _compare_point(cfg: SimConfig, charger: states.ChargerSpec, mean_n: float) -> Simulation:
    sim = simulate(cfg, charger)
    _checked_mean(sim, mean_n)
    sim.battery_at = None  # closures do not cross process boundaries
    sim.trajectory = None
    return sim


@dataclass
class Comparison:
    series: dict[str, MetricSeries]
    summaries: dict[str, ChargingSummary]
    initial_means: dict[str, float]
    provenance: dict

    SUMMARY_COLUMNS = ("charger", "r_norm_at_tau_c", "snr_at_tau_c", "E_max")

    def summary_rows(self) -> list[tuple]:
        return [(k, s.r_norm_at_tau_c, s.snr_at_tau_c, s.e_max) for k, s in self.summaries.items()]


def gaussian_comparison(cfg: SimConfig | None = None, mean_n: float | None = None,
                        workers: int | None = None) -> Comparison:
    """Fock, coherent, thermal and squeezed-vacuum chargers at a common mean occupation."""
    cfg = cfg or SimConfig.from_dict()
    start = time.perf_counter()
    mean_n = cfg.mean_n if mean_n is None else mean_n
    chargers = equal_mean_chargers(mean_n)
    sims = parallel_map(_compare_point, [(cfg, c, mean_n) for c in chargers.values()], workers)
    series = {k: s.series for k, s in zip(chargers, sims)}
    summaries = {k: charging_summary(s) for k, s in series.items()}
    means = {k: s.initial_mean for k, s in zip(chargers, sims)}
    prov = _provenance(cfg, start, mean_n=mean_n, initial_mean_occupation=means,
                       chargers={k: states.charger_label(c) for k, c in chargers.items()},
                       n_max={k: s.n_max for k, s in zip(chargers, sims)})
    return Comparison(series, summaries, means, prov)


def bloch_norm_series(cfg: SimConfig | None = None, mean_n: float | None = None,
                      workers: int | None = None) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """|r|(tau) per charger, restricted to 0 <= tau <= tau_c of that charger."""
    comp = gaussian_comparison(cfg, mean_n, workers)
    out = {}
    for k, s in comp.series.items():
        keep = s.times <= comp.summaries[k].tau_c
        out[k] = (s.times[keep], s.bloch_norm[keep])
    return out


def reduced_battery_at(cfg: SimConfig, charger: states.ChargerSpec, tau: float) -> np.ndarray:
    sim = simulate(cfg, charger, times=np.array([0.0, tau]) if tau > 0 else np.array([0.0]))
    return sim.trajectory.battery_states()[-1]


def wigner_snapshots(cfg: SimConfig | None = None, mean_n: float | None = None,
                     tau: float | None = None, axis=None) -> dict[str, dict]:
    """Fock-basis Wigner function of the reduced qubit state per charger at time tau."""
    cfg = cfg or SimConfig.from_dict()
    mean_n = cfg.mean_n if mean_n is None else mean_n
    tau = cfg.tau if tau is None else tau
    axis = cfg.wigner_axis if axis is None else np.asarray(axis, dtype=float)
    out = {}
    for kind, charger in equal_mean_chargers(mean_n).items():
        rho = reduced_battery_at(cfg, charger, tau)
        out[kind] = {"battery": rho, "W": wigner(rho, axis, axis), "x": axis, "p": axis}
    return out


# --- ergotropy sweeps ---

def _thermal_column(cfg: SimConfig, n_th: float, n_values: list[int]) -> tuple[list[float], int]:
    chargers = [states.ThermalizedFock(n, n_th) for n in n_values]
    n_max = max(resolve_n_max(cfg, c) for c in chargers)
    prop = SpectralPropagator.from_spec(hamiltonian_spec(cfg, n_max))
    xi = []
    for c in chargers:
        sim = simulate(cfg, c, n_max=n_max, gamma=0.0, propagator=prop)
        xi.append(float(np.max(sim.series.ergotropy)))
    return xi, n_max


def thermal_broadening_sweep(cfg: SimConfig | None = None, n_values: Iterable[int] | None = None,
                             n_th_values=None, workers: int | None = None) -> SweepResult:
    """Peak ergotropy of thermalized Fock chargers under unitary charging.

    All n at one n_th share a truncation and a single diagonalization.
    """
    cfg = cfg or SimConfig.from_dict()
    start = time.perf_counter()
    n_values = list(cfg.n_values if n_values is None else n_values)
    n_th_values = [float(x) for x in (cfg.n_th_values if n_th_values is None else n_th_values)]
    cols = parallel_map(_thermal_column, [(cfg, t, n_values) for t in n_th_values], workers)
    records = [cols[j][0][i] for i in range(len(n_values)) for j in range(len(n_th_values))]
    return SweepResult("thermal", {"n": n_values, "n_th": n_th_values}, records,
                       ("n", "n_th", "xi_max"),
                       _provenance(cfg, start, n_max={repr(t): c[1] for t, c in zip(n_th_values, cols)}))


def _xi_max_point(cfg: SimConfig, charger: states.ChargerSpec, gamma: float) -> float:
    return float(np.max(simulate(cfg, charger, gamma=gamma).series.ergotropy))


def dissipation_sweep(cfg: SimConfig | None = None, n_values: Iterable[int] | None = None,
                      gamma_values=None, workers: int | None = None) -> SweepResult:
    """Peak ergotropy of Fock chargers with cavity loss at rate gamma."""
    cfg = cfg or SimConfig.from_dict()
    start = time.perf_counter()
    n_values = list(cfg.n_values if n_values is None else n_values)
    gamma_values = [float(x) for x in (cfg.gamma_values if gamma_values is None else gamma_values)]
    jobs = [(cfg, states.Fock(n), g) for n in n_values for g in gamma_values]
    records = parallel_map(_xi_max_point, jobs, workers)
    return SweepResult("dissipation", {"n": n_values, "gamma": gamma_values}, records,
                       ("n", "gamma", "xi_max"), _provenance(cfg, start))


def thermal_dissipation_heatmap(cfg: SimConfig | None = None, n: int | None = None,
                                n_th_values=None, gamma_values=None,
                                workers: int | None = None) -> SweepResult:
    """Peak ergotropy of a thermalized Fock charger over (n_th, gamma)."""
    cfg = cfg or SimConfig.from_dict()
    start = time.perf_counter()
    n = cfg.heatmap_n if n is None else n
    n_th_values = [float(x) for x in (cfg.n_th_values if n_th_values is None else n_th_values)]
    gamma_values = [float(x) for x in (cfg.gamma_values if gamma_values is None else gamma_values)]
    jobs = [(cfg, states.ThermalizedFock(n, t), g) for t in n_th_values for g in gamma_values]
    records = parallel_map(_xi_max_point, jobs, workers)
    return SweepResult("heatmap", {"n_th": n_th_values, "gamma": gamma_values}, records,
                       ("n_th", "gamma", "xi_max"), _provenance(cfg, start, n=n))


# --- competing Rabi channels ---

@dataclass(frozen=True)
class BeatRow:
    n: int
    omega1: float
    omega2: float
    delta_omega: float
    beat_period: float
    empirical_period: float  # nan when unavailable
    reference_period: float  # pi / g

    COLUMNS = ("n", "omega1", "omega2", "delta_omega", "T_beat", "T_empirical", "T_reference")

    def row(self) -> tuple:
        return (self.n, self.omega1, self.omega2, self.delta_omega, self.beat_period,
                self.empirical_period, self.reference_period)


def local_max_period(times: np.ndarray, values: np.ndarray) -> float:
    """Median spacing of strict interior local maxima; nan with fewer than two."""
    v = np.asarray(values)
    inner = np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
    if inner.size < 2:
        return math.nan
    return float(np.median(np.diff(np.asarray(times)[inner])))


def beat_analysis(cfg: SimConfig | None = None, n_values: Iterable[int] | None = None,
                  g: float = 1.0, delta1: float | None = None, delta2: float | None = None,
                  empirical: bool = True) -> list[BeatRow]:
    """Closed-form channel frequencies with an empirical modulation period.

    The empirical period comes from resonant simulation of E(tau) with
    g1 = g2 = g, so it is only reported when both detunings vanish.
    """
    cfg = cfg or SimConfig.from_dict()
    delta1 = cfg.delta1 if delta1 is None else delta1
    delta2 = cfg.delta2 if delta2 is None else delta2
    n_values = list(cfg.n_values if n_values is None else n_values)
    sim_cfg = cfg.replace(g1=g, g2=g, frame="interaction", gamma=0.0)
    rows = []
    for n in n_values:
        ra = rabi_analysis(n, g, delta1, delta2)
        t_emp = math.nan
        if empirical and delta1 == 0 and delta2 == 0 and g > 0:
            s = simulate(sim_cfg, states.Fock(n)).series
            t_emp = local_max_period(s.times, s.energy)
        rows.append(BeatRow(n, ra.omega1, ra.omega2, ra.delta_omega, ra.beat_period,
                            t_emp, math.pi / g if g > 0 else math.inf))
    return rows
