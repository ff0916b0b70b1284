"""Dense operator algebra on the truncated qubit (x) oscillator space.

Subsystem order is always battery first, charger second. Qubit basis index 0
is the ground state |g>, index 1 the excited state |e>, with sigma_z|e> = +|e>.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

HERMITIAN_TOL = 1e-10


class HilbertError(ValueError):
    """Raised for dimension mismatches and invalid operator input."""


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex square matrix with subsystem dimensions."""

    data: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        dims = tuple(int(d) for d in self.dims)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise HilbertError(f"operator must be square, got shape {data.shape}")
        if int(np.prod(dims)) != data.shape[0]:
            raise HilbertError(f"dims {dims} do not match matrix size {data.shape[0]}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def dag(self) -> Operator:
        return Operator(self.data.conj().T, self.dims)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) < tol)

    def _check(self, other: Operator) -> None:
        if self.dims != other.dims:
            raise HilbertError(f"dims mismatch: {self.dims} vs {other.dims}")

    def __matmul__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(self.data @ other.data, self.dims)

    def __add__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(self.data + other.data, self.dims)

    def __sub__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(self.data - other.data, self.dims)

    def __mul__(self, scalar: complex) -> Operator:
        return Operator(scalar * self.data, self.dims)

    __rmul__ = __mul__

    def __neg__(self) -> Operator:
        return Operator(-self.data, self.dims)

    def __repr__(self) -> str:
        return f"Operator(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure ket (1-D data) or density matrix (2-D data) over ``dims``."""

    data: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        dims = tuple(int(d) for d in self.dims)
        d = int(np.prod(dims))
        if data.ndim == 1:
            ok = data.shape == (d,)
        elif data.ndim == 2:
            ok = data.shape == (d, d)
        else:
            ok = False
        if not ok:
            raise HilbertError(f"state data of shape {data.shape} incompatible with dims {dims}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    @property
    def is_ket(self) -> bool:
        return self.data.ndim == 1

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def to_dm(self) -> QuantumState:
        if not self.is_ket:
            return self
        return QuantumState(np.outer(self.data, self.data.conj()), self.dims)

    def purity(self) -> float:
        if self.is_ket:
            return float(np.vdot(self.data, self.data).real ** 2)
        rho = self.data
        # Tr(rho^2) for Hermitian rho without forming the product
        return float(np.sum(np.abs(rho) ** 2))

    def check(self, ket_tol: float = 1e-10, trace_tol: float = 1e-10,
              herm_tol: float = 1e-10, psd_tol: float = 1e-8) -> None:
        """Raise :class:`HilbertError` unless the state is physical."""
        if self.is_ket:
            norm = np.linalg.norm(self.data)
            if abs(norm - 1.0) >= ket_tol:
                raise HilbertError(f"ket norm {norm!r} deviates from 1")
            return
        rho = self.data
        tr = np.trace(rho)
        if abs(tr - 1.0) >= trace_tol:
            raise HilbertError(f"trace {tr!r} deviates from 1")
        if np.max(np.abs(rho - rho.conj().T)) >= herm_tol:
            raise HilbertError("density matrix is not Hermitian")
        lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if lo < -psd_tol:
            raise HilbertError(f"density matrix has negative eigenvalue {lo!r}")

    def __repr__(self) -> str:
        kind = "ket" if self.is_ket else "dm"
        return f"QuantumState({kind}, dims={self.dims})"


class QubitOps(NamedTuple):
    sigma_minus: Operator
    sigma_plus: Operator
    sigma_x: Operator
    sigma_y: Operator
    sigma_z: Operator
    identity: Operator


def annihilation_op(n_max: int) -> Operator:
    """Bosonic lowering operator truncated to Fock levels ``0..n_max``."""
    if n_max < 0:
        raise HilbertError("n_max must be nonnegative")
    data = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)
    return Operator(data, (n_max + 1,))


def number_op(n_max: int) -> Operator:
    a = annihilation_op(n_max)
    return a.dag() @ a


def identity(dims: int | Sequence[int]) -> Operator:
    dims = (dims,) if isinstance(dims, (int, np.integer)) else tuple(dims)
    return Operator(np.eye(int(np.prod(dims))), dims)


def qubit_ops() -> QubitOps:
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    sp = sm.T.copy()
    sx = sp + sm
    sy = 1j * (sm - sp)
    sz = np.diag([-1.0, 1.0]).astype(complex)
    return QubitOps(*(Operator(m, (2,)) for m in (sm, sp, sx, sy, sz, np.eye(2))))


def tensor(*ops: Operator) -> Operator:
    """Kronecker product; dims concatenate left to right."""
    if not ops:
        raise HilbertError("tensor needs at least one operator")
    data = reduce(np.kron, (op.data for op in ops))
    dims = sum((op.dims for op in ops), ())
    return Operator(data, dims)


def tensor_states(*states: QuantumState) -> QuantumState:
    if all(s.is_ket for s in states):
        data = reduce(np.kron, (s.data for s in states))
    else:
        data = reduce(np.kron, (s.to_dm().data for s in states))
    return QuantumState(data, sum((s.dims for s in states), ()))


def partial_trace(state: QuantumState, keep: int) -> QuantumState:
    """Reduced density matrix of subsystem ``keep``."""
    dims = state.dims
    if len(dims) < 2:
        raise HilbertError("partial trace needs a composite state")
    if not 0 <= keep < len(dims):
        raise HilbertError(f"invalid subsystem index {keep} for dims {dims}")
    k = len(dims)
    if state.is_ket:
        psi = state.data.reshape(dims)
        psi = np.moveaxis(psi, keep, 0).reshape(dims[keep], -1)
        rho = psi @ psi.conj().T
    else:
        t = state.data.reshape(dims + dims)
        rest = [i for i in range(k) if i != keep]
        t = np.transpose(t, [keep] + rest + [k + keep] + [k + i for i in rest])
        m = int(np.prod([dims[i] for i in rest]))
        t = t.reshape(dims[keep], m, dims[keep], m)
        rho = np.einsum("ajbj->ab", t)
    return QuantumState(rho, (dims[keep],))


def _eigh(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not np.any(data.imag):
        w, v = np.linalg.eigh(data.real)
        return w, v.astype(np.complex128)
    return np.linalg.eigh(data)


def hermitian_eig(H: Operator, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian operator.

    The operator is split into the connected components of its sparsity graph
    and each block is diagonalized separately, so eigenvectors carry exact zeros
    outside their invariant subspace. Real symmetric blocks use real arithmetic.
    """
    data = H.data
    scale = max(1.0, float(np.max(np.abs(data), initial=0.0)))
    if np.max(np.abs(data - data.conj().T), initial=0.0) >= tol * scale:
        raise HilbertError("hermitian_eig requires a Hermitian operator")
    d = data.shape[0]
    ncomp, labels = connected_components(csr_matrix(data != 0), directed=False)
    if ncomp == 1:
        return _eigh(data)
    w = np.empty(d)
    v = np.zeros((d, d), dtype=np.complex128)
    col = 0
    for c in range(ncomp):
        idx = np.nonzero(labels == c)[0]
        wb, vb = _eigh(data[np.ix_(idx, idx)])
        w[col:col + idx.size] = wb
        v[idx, col:col + idx.size] = vb
        col += idx.size
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def expectation(op: Operator, state: QuantumState) -> complex:
    if op.dims != state.dims:
        raise HilbertError(f"dims mismatch: {op.dims} vs {state.dims}")
    if state.is_ket:
        return complex(np.vdot(state.data, op.data @ state.data))
    # Tr(O rho) = sum_ij O_ij rho_ji
    return complex(np.sum(op.data * state.data.T))
