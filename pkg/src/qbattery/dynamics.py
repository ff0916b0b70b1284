"""Hamiltonians, unitary and Lindblad propagation, and the two-channel Rabi analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .hilbert import (HilbertError, Operator, QuantumState, annihilation_op,
                      hermitian_eig, identity, qubit_ops, tensor)
from .ode import IntegratorError, dopri5

__all__ = [
    "HamiltonianSpec", "RabiAnalysis", "Trajectory", "IntegratorError",
    "build_interaction_hamiltonian", "build_total_hamiltonian", "spectral_decomposition",
    "SpectralPropagator", "unitary_evolve", "lindblad_rhs", "lindblad_evolve", "rabi_analysis",
    "default_times", "battery_state_of",
]

FRAMES = ("interaction", "lab")
DEFAULT_HORIZON = 2 * math.pi
DEFAULT_GRID_POINTS = 2001


def default_times(horizon: float = DEFAULT_HORIZON, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, horizon, points)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Couplings, frame and truncation. Times are in units of 1/g when g1 = g2 = 1."""

    n_max: int
    g1: float = 1.0
    g2: float = 1.0
    frame: str = "interaction"
    omega_c: float = 1.0
    omega_q: float = 1.0

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.g1 < 0 or self.g2 < 0:
            raise ValueError("couplings must be >= 0")
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        if self.frame == "lab" and (self.omega_c <= 0 or self.omega_q <= 0):
            raise ValueError("lab-frame frequencies must be > 0")

    @property
    def dims(self) -> tuple[int, int]:
        return (2, self.n_max + 1)


def build_interaction_hamiltonian(spec: HamiltonianSpec) -> Operator:
    """g1 (s- a^dag + s+ a) + g2 (s- a^dag^2 + s+ a^2)."""
    q = qubit_ops()
    a = annihilation_op(spec.n_max)
    ad = a.dag()
    one = tensor(q.sigma_minus, ad) + tensor(q.sigma_plus, a)
    two = tensor(q.sigma_minus, ad @ ad) + tensor(q.sigma_plus, a @ a)
    return spec.g1 * one + spec.g2 * two


def build_total_hamiltonian(spec: HamiltonianSpec) -> Operator:
    h = build_interaction_hamiltonian(spec)
    if spec.frame == "interaction":
        return h
    q = qubit_ops()
    a = annihilation_op(spec.n_max)
    h_c = spec.omega_c * tensor(q.identity, a.dag() @ a)
    h_b = (spec.omega_q / 2) * tensor(q.identity + q.sigma_z, identity(spec.n_max + 1))
    return h + h_c + h_b


@lru_cache(maxsize=4)
def spectral_decomposition(spec: HamiltonianSpec) -> tuple[np.ndarray, np.ndarray]:
    """Cached eigendecomposition of the total Hamiltonian for ``spec``."""
    w, v = hermitian_eig(build_total_hamiltonian(spec))
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def battery_state_of(rho: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    """2x2 reduced battery matrix of a joint ket or density matrix."""
    m = int(np.prod(dims[1:]))
    if rho.ndim == 1:
        psi = rho.reshape(2, m)
        return psi @ psi.conj().T
    return np.einsum("akbk->ab", rho.reshape(2, m, 2, m))


class Trajectory:
    """Time series of joint states; reduced battery states are precomputed.

    Full joint states are produced lazily by ``traj[i]`` where the propagator
    allows it, so long grids over large spaces never materialize at once.
    """

    def __init__(self, times: np.ndarray, dims: tuple[int, ...], battery: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.dims = dims
        self.battery = battery

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> QuantumState:
        raise NotImplementedError

    def battery_states(self) -> np.ndarray:
        return self.battery


class SpectralPropagator:
    """exp(-iHt) through one eigendecomposition, reusable across initial states.

    For density-matrix inputs the reduced battery state is obtained without
    forming rho(t): with M = V^dag rho0 V and u = exp(-i lambda t),
    rho_ee(t) = u^T (G_ee^T * M) u* and rho_eg(t) = u^T (G_ge^T * M) u*, where
    G_ab = V_a^dag V_b are Gram blocks of the eigenvectors (cached here).
    """

    def __init__(self, H: Operator, eig: tuple[np.ndarray, np.ndarray] | None = None):
        self.dims = H.dims
        self.evals, self.evecs = eig if eig is not None else hermitian_eig(H)
        self.real = not np.any(self.evecs.imag)
        self._grams = None

    @classmethod
    def from_spec(cls, spec: HamiltonianSpec) -> SpectralPropagator:
        H = build_total_hamiltonian(spec)
        return cls(H, spectral_decomposition(spec))

    def grams(self) -> tuple[np.ndarray, np.ndarray]:
        if self._grams is None:
            m = int(np.prod(self.dims[1:]))
            v = self.evecs.real if self.real else self.evecs
            vg, ve = v[:m], v[m:]
            self._grams = (ve.conj().T @ ve, vg.conj().T @ ve)
        return self._grams

    def evolve(self, state0: QuantumState, times, chunk: int = 256) -> UnitaryTrajectory:
        if self.dims != state0.dims:
            raise HilbertError(f"dims mismatch: {self.dims} vs {state0.dims}")
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size == 0 or times[0] < 0:
            raise ValueError("times must be a nonempty grid starting at >= 0")
        return UnitaryTrajectory(self, state0, times, chunk)


class UnitaryTrajectory(Trajectory):
    def __init__(self, prop: SpectralPropagator, state0: QuantumState, times, chunk: int = 256):
        self.prop = prop
        self.evals = prop.evals
        self.evecs = prop.evecs
        self.state0 = state0
        self.dims = prop.dims
        v = prop.evecs
        if state0.is_ket:
            self._coef = v.conj().T @ state0.data
        else:
            rho0 = state0.data
            if not np.any(rho0 - np.diag(np.diagonal(rho0))):
                # diagonal initial state: only occupied rows of V contribute
                p = np.diagonal(rho0)
                idx = np.nonzero(p)[0]
                vi = v[idx].real if prop.real else v[idx]
                self._coef = (vi.conj().T * p[idx]) @ vi
            else:
                self._coef = v.conj().T @ rho0 @ v
            self._weights = None
        super().__init__(times, prop.dims, self.battery_at(times, chunk))

    def _phases(self, t):
        return np.exp(-1j * np.outer(t, self.evals))

    def battery_at(self, times, chunk: int = 256) -> np.ndarray:
        """Reduced battery states at arbitrary times, shape (len(times), 2, 2)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self.state0.is_ket:
            return self._battery_ket(times, chunk)
        return self._battery_dm(times, chunk)

    def _battery_ket(self, times, chunk):
        m = int(np.prod(self.dims[1:]))
        out = np.empty((len(times), 2, 2), dtype=complex)
        for s in range(0, len(times), chunk):
            u = self._phases(times[s:s + chunk])               # (T, d)
            psi = (u * self._coef) @ self.evecs.T                # (T, d)
            psi = psi.reshape(-1, 2, m)
            out[s:s + chunk] = np.einsum("tak,tbk->tab", psi, psi.conj())
        return out

    def _dm_weights(self):
        if self._weights is None:
            g_ee, g_ge = self.prop.grams()
            mat = self._coef
            real = self.prop.real and not np.any(np.imag(mat))
            if real:
                mat = np.real(mat)
            self._weights = (g_ee.T * mat, g_ge.T * mat, real)
        return self._weights

    def _battery_dm(self, times, chunk):
        w_ee, w_eg, real = self._dm_weights()
        trace = np.trace(self.state0.data).real
        out = np.empty((len(times), 2, 2), dtype=complex)
        for s in range(0, len(times), chunk):
            t = times[s:s + chunk]
            if real:
                # u = c - i s with real symmetric w_ee: real products replace complex ones
                ph = np.outer(t, self.evals)
                c, sn = np.cos(ph), np.sin(ph)
                zc_ee, zs_ee = c @ w_ee, sn @ w_ee
                zc_eg, zs_eg = c @ w_eg, sn @ w_eg
                p_e = np.einsum("tj,tj->t", zc_ee, c) + np.einsum("tj,tj->t", zs_ee, sn)
                c_eg = (np.einsum("tj,tj->t", zc_eg, c) + np.einsum("tj,tj->t", zs_eg, sn)
                        + 1j * (np.einsum("tj,tj->t", zc_eg, sn) - np.einsum("tj,tj->t", zs_eg, c)))
            else:
                u = self._phases(t)
                uc = u.conj()
                p_e = np.einsum("tj,tj->t", u @ w_ee, uc).real
                c_eg = np.einsum("tj,tj->t", u @ w_eg, uc)
            out[s:s + chunk, 1, 1] = p_e
            out[s:s + chunk, 0, 0] = trace - p_e
            out[s:s + chunk, 1, 0] = c_eg
            out[s:s + chunk, 0, 1] = np.conj(c_eg)
        return out

    def __getitem__(self, i: int) -> QuantumState:
        t = self.times[i]
        u = np.exp(-1j * self.evals * t)
        if self.state0.is_ket:
            return QuantumState(self.evecs @ (u * self._coef), self.dims)
        rho = self.evecs @ (u[:, None] * self._coef * u.conj()[None, :]) @ self.evecs.conj().T
        return QuantumState(rho, self.dims)


def unitary_evolve(H: Operator, state0: QuantumState, times,
                   eig: tuple[np.ndarray, np.ndarray] | None = None) -> UnitaryTrajectory:
    """Exact propagation through one spectral decomposition of ``H``."""
    if H.dims != state0.dims:
        raise HilbertError(f"dims mismatch: {H.dims} vs {state0.dims}")
    return SpectralPropagator(H, eig).evolve(state0, times)


# --- Lindblad ---

class _LeftMultiplier:
    """Left product with a fixed operator, exploiting a banded structure.

    The operator is stored densely; when it occupies few diagonals the product
    is evaluated one diagonal at a time (O(d^2) per diagonal) instead of O(d^3).
    """

    MAX_BANDS = 24

    def __init__(self, op: np.ndarray):
        self.dense = np.asarray(op)
        d = self.dense.shape[0]
        rows, cols = np.nonzero(self.dense)
        offsets = np.unique(cols - rows)
        self.banded = offsets.size <= self.MAX_BANDS
        self.bands = []
        if self.banded:
            for o in offsets:
                diag = np.diagonal(self.dense, offset=o).copy()
                if np.all(diag.imag == 0):
                    diag = diag.real
                self.bands.append((int(o), diag[:, None]))
        self.d = d

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if not self.banded:
            return self.dense @ x
        out = np.zeros_like(x)
        d = self.d
        for o, diag in self.bands:
            if o >= 0:
                out[:d - o] += diag * x[o:]
            else:
                out[-o:] += diag * x[:d + o]
        return out


@njit(cache=True)
def _hermitian_rhs(rho, h_off, h_diag, a_off, a_diag, anti, gamma, work, out):
    """Fused generator for Hermitian rho with banded H and banded jump operator."""
    d = rho.shape[0]
    for i in range(d):
        for j in range(d):
            work[i, j] = 0.0
        for b in range(h_off.size):
            k = i + h_off[b]
            if 0 <= k < d:
                c = h_diag[b, i]
                for j in range(d):
                    work[i, j] += c * rho[k, j]
    for i in range(d):
        for j in range(d):
            x = work[i, j] - np.conj(work[j, i])
            out[i, j] = complex(x.imag, -x.real)
    if gamma == 0.0:
        return out
    for i in range(d):
        for b1 in range(a_off.size):
            k = i + a_off[b1]
            if k < 0 or k >= d:
                continue
            ci = a_diag[b1, i]
            for b2 in range(a_off.size):
                for j in range(d):
                    l = j + a_off[b2]
                    if 0 <= l < d:
                        out[i, j] += gamma * ci * rho[k, l] * np.conj(a_diag[b2, j])
        for j in range(d):
            out[i, j] -= gamma * anti[i, j] * rho[i, j]
    return out


def _bands(op: _LeftMultiplier) -> tuple[np.ndarray, np.ndarray]:
    d = op.d
    offs = np.array([o for o, _ in op.bands], dtype=np.int64)
    diags = np.zeros((offs.size, d), dtype=complex)
    for b, (o, diag) in enumerate(op.bands):
        if o >= 0:
            diags[b, :d - o] = diag[:, 0]
        else:
            diags[b, -o:] = diag[:, 0]
    return offs, diags


class LindbladGenerator:
    """Matrix-free d rho/dt = -i[H, rho] + gamma D[A] rho."""

    def __init__(self, H: Operator, gamma: float, jump: Operator):
        if gamma < 0:
            raise ValueError("gamma must be >= 0")
        if H.dims != jump.dims:
            raise HilbertError("Hamiltonian and jump operator dims differ")
        self.dims = H.dims
        self.gamma = float(gamma)
        self.h = _LeftMultiplier(H.data)
        self.a = _LeftMultiplier(jump.data)
        ada = jump.data.conj().T @ jump.data
        if np.count_nonzero(ada - np.diag(np.diag(ada))) == 0:
            n = np.diag(ada).real
            self.anti = 0.5 * (n[:, None] + n[None, :])
            self.ada = None
        else:
            self.anti = None
            self.ada = _LeftMultiplier(ada)
        self._fused = self.h.banded and self.a.banded and self.anti is not None
        if self._fused:
            self._h_bands = _bands(self.h)
            self._a_bands = _bands(self.a)
            self._work = np.empty(H.shape, dtype=complex)

    def __call__(self, rho: np.ndarray, hermitian: bool = False) -> np.ndarray:
        if hermitian and self._fused:
            out = np.empty_like(rho)
            return _hermitian_rhs(rho, *self._h_bands, *self._a_bands, self.anti,
                                  self.gamma, self._work, out)
        x = self.h(rho)
        # rho H = (H rho^dag)^dag
        rho_h = x.conj().T if hermitian else self.h(rho.conj().T).conj().T
        out = -1j * (x - rho_h)
        if self.gamma:
            ar = self.a(rho if hermitian else rho.conj().T)
            jump = self.a(ar.conj().T)  # A rho A^dag
            if self.anti is not None:
                out += self.gamma * (jump - self.anti * rho)
            else:
                y = self.ada(rho)
                yr = y.conj().T if hermitian else self.ada(rho.conj().T).conj().T
                out += self.gamma * (jump - 0.5 * (y + yr))
        return out


def charger_loss_operator(dims: tuple[int, ...]) -> Operator:
    return tensor(identity(dims[0]), annihilation_op(dims[1] - 1))


def lindblad_rhs(rho: np.ndarray, H: Operator, gamma: float, jump: Operator | None = None) -> np.ndarray:
    """-i[H, rho] + gamma (A rho A^dag - {A^dag A, rho}/2), A = 1 (x) a by default."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != H.shape:
        raise HilbertError(f"rho shape {rho.shape} does not match H {H.shape}")
    jump = charger_loss_operator(H.dims) if jump is None else jump
    return LindbladGenerator(H, gamma, jump)(rho)


class LindbladTrajectory(Trajectory):
    def __init__(self, times, dims, battery, states=None, charger_number=None,
                 trace_error=0.0, min_eigenvalues=None, stats=None):
        super().__init__(times, dims, battery)
        self.states = states
        self.charger_number = charger_number
        self.trace_error = trace_error
        self.min_eigenvalues = min_eigenvalues
        self.stats = stats or {}

    def __getitem__(self, i: int) -> QuantumState:
        if self.states is None:
            raise IndexError("joint states were not kept; pass keep_states=True")
        return QuantumState(self.states[i], self.dims)


def lindblad_evolve(H: Operator, gamma: float, rho0: QuantumState, times,
                    rtol: float = 1e-8, atol: float = 1e-10, jump: Operator | None = None,
                    keep_states: bool = False, check_positivity: bool = False,
                    trace_tol: float = 1e-8) -> LindbladTrajectory:
    """Adaptive Dormand-Prince integration of the charger-loss master equation.

    Every accepted step is re-symmetrized, (rho + rho^dag)/2. Positivity is only
    recorded (``check_positivity``), never enforced.
    """
    if not H.is_hermitian():
        raise HilbertError("Hamiltonian must be Hermitian")
    if rho0.dims != H.dims:
        raise HilbertError(f"dims mismatch: {rho0.dims} vs {H.dims}")
    jump = charger_loss_operator(H.dims) if jump is None else jump
    gen = LindbladGenerator(H, gamma, jump)
    dims = H.dims
    m = int(np.prod(dims[1:]))
    nvec = np.tile(np.arange(m, dtype=float), dims[0]) if len(dims) == 2 else None

    def observe(rho):
        rec = {"battery": battery_state_of(rho, dims), "trace": np.trace(rho)}
        if nvec is not None:
            rec["number"] = float(np.dot(nvec, np.diag(rho).real))
        if keep_states:
            rec["state"] = rho.copy()
        if check_positivity:
            rec["min_eig"] = float(np.linalg.eigvalsh(rho)[0])
        return rec

    def sym(rho):
        return 0.5 * (rho + rho.conj().T)

    records, stats = dopri5(lambda r: gen(r, hermitian=True), rho0.to_dm().data,
                            np.asarray(times, dtype=float), rtol=rtol, atol=atol,
                            observe=observe, post_step=sym)
    trace_error = max(abs(r["trace"] - 1.0) for r in records)
    if trace_error > trace_tol:
        raise IntegratorError(f"trace drifted by {trace_error:.3g} (> {trace_tol:g})")
    return LindbladTrajectory(
        times, dims,
        battery=np.array([r["battery"] for r in records]),
        states=np.array([r["state"] for r in records]) if keep_states else None,
        charger_number=np.array([r["number"] for r in records]) if nvec is not None else None,
        trace_error=trace_error,
        min_eigenvalues=np.array([r["min_eig"] for r in records]) if check_positivity else None,
        stats=stats,
    )


# --- competing Rabi frequencies ---

@dataclass(frozen=True)
class RabiAnalysis:
    n: int
    g: float
    delta1: float
    delta2: float
    omega1: float
    omega2: float
    delta_omega: float
    beat_period: float  # inf when the two channels are degenerate


def rabi_analysis(n: int, g: float = 1.0, delta1: float = 0.0, delta2: float = 0.0,
                  g2: float | None = None) -> RabiAnalysis:
    """Channel Rabi frequencies for |g,n>: one-photon vs two-photon ladder."""
    if n < 0 or g < 0:
        raise ValueError("n and g must be >= 0")
    g2 = g if g2 is None else g2
    omega1 = math.sqrt(delta1**2 + (2 * g) ** 2 * n)
    omega2 = math.sqrt(delta2**2 + (2 * g2) ** 2 * n * (n - 1))
    d_omega = abs(omega1 - omega2)
    period = math.inf if d_omega == 0 else 2 * math.pi / d_omega
    return RabiAnalysis(n, g, delta1, delta2, omega1, omega2, d_omega, period)
