"""Charger preparations and the joint battery (x) charger initial state."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .hilbert import QuantumState, tensor_states

TAIL_THRESHOLD = 1e-7
# levels kept above the initial support; the interaction spreads a Fock
# charger upward by < 16 levels at 1e-12 accuracy for n <= 10
DYNAMIC_MARGIN = 16
MAX_AUTO_N = 8192


class TruncationError(ValueError):
    """Raised when a charger state does not fit the requested truncation."""


@dataclass(frozen=True)
class Fock:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"Fock number must be a nonnegative integer, got {self.n!r}")


@dataclass(frozen=True)
class Coherent:
    alpha: complex


@dataclass(frozen=True)
class Thermal:
    nbar: float

    def __post_init__(self):
        if not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise ValueError(f"thermal occupation must be finite and >= 0, got {self.nbar!r}")


@dataclass(frozen=True)
class SqueezedVacuum:
    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ValueError(f"squeezing must be finite and >= 0, got {self.r!r}")


@dataclass(frozen=True)
class ThermalizedFock:
    n: int
    n_th: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"Fock number must be a nonnegative integer, got {self.n!r}")
        if not (math.isfinite(self.n_th) and self.n_th >= 0):
            raise ValueError(f"n_th must be finite and >= 0, got {self.n_th!r}")


ChargerSpec = Union[Fock, Coherent, Thermal, SqueezedVacuum, ThermalizedFock]

CHARGER_KINDS = ("fock", "coherent", "thermal", "squeezed", "thermalized_fock")


def charger_from_mean(kind: str, mean: float) -> ChargerSpec:
    """Resolve a charger with a prescribed mean occupation (phases set to zero)."""
    if mean < 0:
        raise ValueError("mean occupation must be >= 0")
    if kind == "fock":
        if mean != int(mean):
            raise ValueError("Fock charger needs an integer mean occupation")
        return Fock(int(mean))
    if kind == "coherent":
        return Coherent(complex(math.sqrt(mean)))
    if kind == "thermal":
        return Thermal(float(mean))
    if kind == "squeezed":
        return SqueezedVacuum(math.asinh(math.sqrt(mean)), 0.0)
    raise ValueError(f"cannot resolve charger kind {kind!r} from a mean occupation")


def charger_label(spec: ChargerSpec) -> str:
    return {
        Fock: "fock", Coherent: "coherent", Thermal: "thermal",
        SqueezedVacuum: "squeezed", ThermalizedFock: "thermalized_fock",
    }[type(spec)]


def tail_mass(populations, n_max: int) -> float:
    """Probability weight at Fock indices >= n_max - 4.

    ``populations`` are the exact (not yet renormalized) probabilities of levels
    ``0..n_max``; weight beyond ``n_max`` is inferred from unit total probability.
    """
    p = np.asarray(populations, dtype=float)
    cut = max(n_max - 4, 0)
    return max(0.0, 1.0 - float(np.sum(p[:cut])))


def _check_tail(populations, n_max: int, tol: float, what: str) -> None:
    t = tail_mass(populations, n_max)
    if t > tol:
        raise TruncationError(
            f"{what}: tail mass {t:.3g} above threshold {tol:.1g} at n_max={n_max}")


# --- amplitude / population kernels on levels 0..n_max (unnormalized) ---

def _coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    k = np.arange(n_max + 1)
    c = np.zeros(n_max + 1, dtype=complex)
    if alpha == 0:
        c[0] = 1.0
        return c
    mag, phase = abs(alpha), np.angle(alpha)
    logc = -0.5 * mag**2 + k * math.log(mag) - 0.5 * gammaln(k + 1)
    return np.exp(logc) * np.exp(1j * phase * k)


def _thermal_populations(nbar: float, n_max: int) -> np.ndarray:
    k = np.arange(n_max + 1)
    if nbar == 0:
        return (k == 0).astype(float)
    return np.exp(k * math.log(nbar / (1 + nbar)) - math.log1p(nbar))


def _squeezed_amplitudes(r: float, theta: float, n_max: int) -> np.ndarray:
    c = np.zeros(n_max + 1, dtype=complex)
    if r == 0:
        c[0] = 1.0
        return c
    m = np.arange(n_max // 2 + 1)
    logc = (-0.5 * math.log(math.cosh(r)) + m * math.log(math.tanh(r))
            + 0.5 * gammaln(2 * m + 1) - m * math.log(2.0) - gammaln(m + 1))
    c[2 * m] = np.exp(logc) * np.exp(1j * (theta + math.pi) * m)
    return c


def thermalized_fock_populations(n: int, n_th: float, n_max: int,
                                 tol: float = TAIL_THRESHOLD,
                                 renormalize: bool = True) -> np.ndarray:
    """Photon-number distribution of a Fock state smeared by Gaussian displacements.

    p_k = sum_{j<=min(k,n)} C(n,j) C(k,j) n_th^(k+n-2j) / (1+n_th)^(k+n+1),
    evaluated in log space. ``n_th == 0`` returns the Kronecker delta at ``n``.
    """
    if n < 0 or n_th < 0:
        raise ValueError("n and n_th must be nonnegative")
    if n > n_max:
        raise TruncationError(f"Fock number {n} exceeds n_max={n_max}")
    k = np.arange(n_max + 1)
    if n_th == 0:
        return (k == n).astype(float)
    j = np.arange(n + 1)
    K, J = np.meshgrid(k, j, indexing="ij")
    valid = J <= K
    Jc = np.where(valid, J, 0)
    logt = (gammaln(n + 1) - gammaln(Jc + 1) - gammaln(n - Jc + 1)
            + gammaln(K + 1) - gammaln(Jc + 1) - gammaln(K - Jc + 1)
            + (K + n - 2 * Jc) * math.log(n_th) - (K + n + 1) * math.log1p(n_th))
    logt = np.where(valid, logt, -np.inf)
    p = np.exp(logsumexp(logt, axis=1))
    if tol is not None:
        _check_tail(p, n_max, tol, f"thermalized Fock(n={n}, n_th={n_th})")
    return p / p.sum() if renormalize else p


# --- public constructors ---

def fock_state(n: int, n_max: int) -> QuantumState:
    if not 0 <= n <= n_max:
        raise TruncationError(f"Fock number {n} outside 0..{n_max}")
    psi = np.zeros(n_max + 1, dtype=complex)
    psi[n] = 1.0
    return QuantumState(psi, (n_max + 1,))


def coherent_state(alpha: complex, n_max: int, tol: float = TAIL_THRESHOLD) -> QuantumState:
    c = _coherent_amplitudes(complex(alpha), n_max)
    _check_tail(np.abs(c) ** 2, n_max, tol, f"coherent(alpha={alpha})")
    return QuantumState(c / np.linalg.norm(c), (n_max + 1,))


def thermal_state(nbar: float, n_max: int, tol: float = TAIL_THRESHOLD) -> QuantumState:
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    p = _thermal_populations(nbar, n_max)
    _check_tail(p, n_max, tol, f"thermal(nbar={nbar})")
    return QuantumState(np.diag(p / p.sum()), (n_max + 1,))


def squeezed_vacuum(r: float, theta: float, n_max: int, tol: float = TAIL_THRESHOLD) -> QuantumState:
    if r < 0:
        raise ValueError("r must be >= 0")
    c = _squeezed_amplitudes(r, theta, n_max)
    _check_tail(np.abs(c) ** 2, n_max, tol, f"squeezed vacuum(r={r})")
    return QuantumState(c / np.linalg.norm(c), (n_max + 1,))


def thermalized_fock_state(n: int, n_th: float, n_max: int, tol: float = TAIL_THRESHOLD) -> QuantumState:
    p = thermalized_fock_populations(n, n_th, n_max, tol=tol)
    return QuantumState(np.diag(p), (n_max + 1,))


def charger_state(spec: ChargerSpec, n_max: int, tol: float = TAIL_THRESHOLD) -> QuantumState:
    if isinstance(spec, Fock):
        return fock_state(spec.n, n_max)
    if isinstance(spec, Coherent):
        return coherent_state(spec.alpha, n_max, tol)
    if isinstance(spec, Thermal):
        return thermal_state(spec.nbar, n_max, tol)
    if isinstance(spec, SqueezedVacuum):
        return squeezed_vacuum(spec.r, spec.theta, n_max, tol)
    if isinstance(spec, ThermalizedFock):
        return thermalized_fock_state(spec.n, spec.n_th, n_max, tol)
    raise TypeError(f"unknown charger spec {spec!r}")


def charger_populations(spec: ChargerSpec, n_max: int) -> np.ndarray:
    """Exact photon-number probabilities on ``0..n_max`` before renormalization."""
    if isinstance(spec, Fock):
        return (np.arange(n_max + 1) == spec.n).astype(float)
    if isinstance(spec, Coherent):
        return np.abs(_coherent_amplitudes(complex(spec.alpha), n_max)) ** 2
    if isinstance(spec, Thermal):
        return _thermal_populations(spec.nbar, n_max)
    if isinstance(spec, SqueezedVacuum):
        return np.abs(_squeezed_amplitudes(spec.r, spec.theta, n_max)) ** 2
    if isinstance(spec, ThermalizedFock):
        return thermalized_fock_populations(spec.n, spec.n_th, n_max, tol=None, renormalize=False)
    raise TypeError(f"unknown charger spec {spec!r}")


def _support_floor(spec: ChargerSpec) -> int:
    if isinstance(spec, (Fock, ThermalizedFock)):
        return spec.n + 4
    return 16


def support_n_max(spec: ChargerSpec, tol: float = TAIL_THRESHOLD) -> int:
    """Smallest truncation whose tail mass is within ``tol``."""
    lo = _support_floor(spec)
    size = max(64, 2 * lo)
    while size <= MAX_AUTO_N:
        p = charger_populations(spec, size)
        # tail(N) = 1 - sum_{k < N-4} p_k for N = 0..size
        head = np.concatenate([[0.0], np.cumsum(p)])
        tails = 1.0 - head[np.clip(np.arange(size + 1) - 4, 0, None)]
        ok = np.nonzero(tails[lo:] <= tol)[0]
        if ok.size:
            return int(lo + ok[0])
        size *= 2
    raise TruncationError(f"{spec!r} needs more than {MAX_AUTO_N} Fock levels")


def auto_n_max(spec: ChargerSpec, tol: float = TAIL_THRESHOLD, margin: int = DYNAMIC_MARGIN) -> int:
    """Truncation used when ``n_max`` is "auto": tail-mass support plus dynamic margin."""
    return support_n_max(spec, tol) + margin


def ground_qubit() -> QuantumState:
    return QuantumState(np.array([1.0, 0.0], dtype=complex), (2,))


def joint_initial_state(charger: ChargerSpec, n_max: int | None = None,
                        tol: float = TAIL_THRESHOLD, ket: bool = True) -> QuantumState:
    """|g><g| (x) rho_C(0); a ket when the charger is pure and ``ket`` is set."""
    if n_max is None:
        n_max = auto_n_max(charger, tol)
    rho_c = charger_state(charger, n_max, tol)
    if rho_c.is_ket and ket:
        return tensor_states(ground_qubit(), rho_c)
    return tensor_states(ground_qubit().to_dm(), rho_c.to_dm())


def mean_occupation(state: QuantumState) -> float:
    """<a^dagger a> of a single-mode state."""
    k = np.arange(state.dim)
    if state.is_ket:
        return float(np.sum(k * np.abs(state.data) ** 2))
    return float(np.sum(k * np.diag(state.data).real))

