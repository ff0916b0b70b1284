"""Figures of merit of the reduced battery state and the Fock-basis Wigner function.

All energies are in units of the qubit splitting unless ``omega_q`` is given.
Battery matrices are 2x2 in the (|g>, |e>) basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hilbert import QuantumState

SNR_INF_TOL = 1e-15
ZERO_ENERGY_TOL = 1e-12


def _rho(rho_b) -> np.ndarray:
    if isinstance(rho_b, QuantumState):
        rho_b = rho_b.to_dm().data
    rho_b = np.asarray(rho_b, dtype=complex)
    if rho_b.shape[-2:] != (2, 2):
        raise ValueError(f"battery state must be 2x2, got {rho_b.shape}")
    return rho_b


def stored_energy(rho_b, omega_q: float = 1.0):
    """Tr[H_B rho_B] = omega_q * <e|rho_B|e>."""
    return omega_q * _rho(rho_b)[..., 1, 1].real


def _det(rho: np.ndarray):
    det = (rho[..., 0, 0] * rho[..., 1, 1] - rho[..., 0, 1] * rho[..., 1, 0]).real
    return np.clip(det, 0.0, 0.25)


def ergotropy(rho_b, omega_q: float = 1.0):
    """E - (omega_q/2) [1 - sqrt(1 - 4 det rho_B)], det clamped to [0, 1/4]."""
    rho = _rho(rho_b)
    e = omega_q * rho[..., 1, 1].real
    passive = 0.5 * omega_q * (1.0 - np.sqrt(1.0 - 4.0 * _det(rho)))
    return np.clip(e - passive, 0.0, None)


def efficiency(rho_b, omega_q: float = 1.0):
    e = stored_energy(rho_b, omega_q)
    xi = ergotropy(rho_b, omega_q)
    small = e < ZERO_ENERGY_TOL * omega_q
    eta = xi / np.where(small, 1.0, e)
    return np.where(small, 0.0, np.minimum(eta, 1.0))


def energy_variance(rho_b, omega_q: float = 1.0):
    """Tr[H_B^2 rho] - E^2, which for a qubit is omega_q E - E^2."""
    e = stored_energy(rho_b, omega_q)
    return omega_q * e - e**2


def snr(rho_b, omega_q: float = 1.0):
    """log10(E^2 / Var E), with -inf for an empty battery and +inf at full charge.

    E^2 / (omega_q E - E^2) reduces to E / (omega_q - E), which stays accurate
    near both ends where the variance itself underflows.
    """
    e = np.asarray(stored_energy(rho_b, omega_q), dtype=float)
    gap = omega_q - e
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.log10(e) - np.log10(gap)
    val = np.where(e <= 0.0, -np.inf, val)
    val = np.where((e > 0.0) & (gap * e <= SNR_INF_TOL * omega_q**2) & (e > 0.5 * omega_q), np.inf, val)
    return val if val.ndim else float(val)


def bloch_vector(rho_b) -> np.ndarray:
    """(<sigma_x>, <sigma_y>, <sigma_z>) with sigma_z|e> = +|e>."""
    rho = _rho(rho_b)
    c = rho[..., 1, 0]  # <e|rho|g>
    rx = 2.0 * c.real
    ry = -2.0 * c.imag
    rz = (rho[..., 1, 1] - rho[..., 0, 0]).real
    return np.stack([rx, ry, rz], axis=-1)


def purity(rho_b):
    rho = _rho(rho_b)
    return np.einsum("...ij,...ji->...", rho, rho).real


@dataclass
class MetricSeries:
    times: np.ndarray
    energy: np.ndarray
    ergotropy: np.ndarray
    efficiency: np.ndarray
    snr: np.ndarray
    bloch: np.ndarray
    bloch_norm: np.ndarray
    purity: np.ndarray
    meta: dict = field(default_factory=dict)

    COLUMNS = ("tau", "E", "xi", "eta", "snr", "rx", "ry", "rz", "r_norm", "purity")

    @classmethod
    def from_battery_states(cls, times, battery: np.ndarray, omega_q: float = 1.0, **meta) -> MetricSeries:
        battery = _rho(battery)
        r = bloch_vector(battery)
        return cls(
            times=np.asarray(times, dtype=float),
            energy=stored_energy(battery, omega_q),
            ergotropy=ergotropy(battery, omega_q),
            efficiency=efficiency(battery, omega_q),
            snr=np.asarray(snr(battery, omega_q)),
            bloch=r,
            bloch_norm=np.linalg.norm(r, axis=-1),
            purity=purity(battery),
            meta=dict(meta),
        )

    def __len__(self) -> int:
        return self.times.size

    def rows(self):
        for i in range(len(self)):
            rx, ry, rz = self.bloch[i]
            yield (self.times[i], self.energy[i], self.ergotropy[i], self.efficiency[i],
                   self.snr[i], rx, ry, rz, self.bloch_norm[i], self.purity[i])


@dataclass(frozen=True)
class ChargingSummary:
    tau_c: float
    e_max: float
    p_bar: float
    xi_max: float
    snr_at_tau_c: float
    eta_at_tau_c: float
    r_norm_at_tau_c: float


def _golden_max(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def charging_summary(series: MetricSeries, refine: bool = False,
                     battery_at: Callable[[float], np.ndarray] | None = None,
                     tol: float = 1e-4) -> ChargingSummary:
    """Earliest time of maximal stored energy and the derived average power.

    With ``refine`` the maximum is polished by golden-section search inside the
    bracketing grid interval, evaluating ``battery_at(t)`` (fresh propagation).
    """
    if len(series) == 0:
        raise ValueError("empty metric series")
    t, e = series.times, series.energy
    i = int(np.argmax(e))
    e_max = float(e[i])
    if e_max <= 0.0:
        pos = np.nonzero(t > 0)[0]
        tau_c = float(t[pos[0]]) if pos.size else float(t[-1])
        k = int(pos[0]) if pos.size else len(t) - 1
        return ChargingSummary(tau_c, 0.0, 0.0, float(np.max(series.ergotropy)),
                               float(series.snr[k]), float(series.efficiency[k]),
                               float(series.bloch_norm[k]))
    tau_c = float(t[i])
    rho_c = None
    if refine:
        if battery_at is None:
            raise ValueError("refinement needs a propagator (battery_at)")
        lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
        x, fx = _golden_max(lambda s: float(stored_energy(battery_at(s))), lo, hi, tol)
        if fx > e_max:
            tau_c, e_max = float(x), float(fx)
            rho_c = battery_at(tau_c)
    if rho_c is None:
        snr_c, eta_c, r_c = series.snr[i], series.efficiency[i], series.bloch_norm[i]
    else:
        snr_c, eta_c = snr(rho_c), efficiency(rho_c)
        r_c = np.linalg.norm(bloch_vector(rho_c))
    if tau_c <= 0:
        pos = np.nonzero(t > 0)[0]
        tau_c = float(t[pos[0]]) if pos.size else 1.0
    return ChargingSummary(
        tau_c=tau_c, e_max=e_max, p_bar=e_max / tau_c,
        xi_max=float(np.max(series.ergotropy)),
        snr_at_tau_c=float(snr_c), eta_at_tau_c=float(eta_c), r_norm_at_tau_c=float(r_c),
    )


def wigner(state, xvec, pvec) -> np.ndarray:
    """Wigner function W[i, j] = W(x_i, p_j) of a single-mode state in the Fock basis.

    Convention: x = (a + a^dag)/sqrt(2), so the vacuum is exp(-(x^2 + p^2))/pi and
    the grid integral of W is Tr rho. Any matrix dimension is accepted; a
    qubit state is read as a two-level Fock truncation.
    """
    if isinstance(state, QuantumState):
        rho = state.to_dm().data
    else:
        rho = np.asarray(state, dtype=complex)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
    X, P = np.meshgrid(np.asarray(xvec, float), np.asarray(pvec, float), indexing="ij")
    alpha = (X + 1j * P) / math.sqrt(2.0)
    dim = rho.shape[0]
    # wl[n] holds the basis function for matrix element (m, n) during sweep m
    wl = [None] * dim
    wl[0] = np.exp(-2.0 * np.abs(alpha) ** 2) / math.pi + 0j
    w = rho[0, 0].real * wl[0].real
    for n in range(1, dim):
        wl[n] = 2.0 * alpha * wl[n - 1] / math.sqrt(n)
        w += 2.0 * np.real(rho[0, n] * wl[n])
    for m in range(1, dim):
        temp = wl[m]
        wl[m] = (2.0 * np.conj(alpha) * temp - math.sqrt(m) * wl[m - 1]) / math.sqrt(m)
        w += np.real(rho[m, m] * wl[m])
        for n in range(m + 1, dim):
            temp2 = (2.0 * alpha * wl[n - 1] - math.sqrt(m) * temp) / math.sqrt(n)
            temp = wl[n]
            wl[n] = temp2
            w += 2.0 * np.real(rho[m, n] * wl[n])
    return w
