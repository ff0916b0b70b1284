"""Dormand-Prince 5(4) integrator for matrix-valued ODEs with dense output."""

from __future__ import annotations

from typing import Callable

import numpy as np

# Butcher tableau (Dormand & Prince 1980)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# 5th minus embedded 4th order weights, 7 stages (last is FSAL)
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Shampine's 4th order continuous extension: y(t + x h) = y + h * sum_j (K^T P)_j x^(j+1)
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegratorError(RuntimeError):
    """Step size underflow or an unreachable tolerance."""


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


def _initial_step(fun, y0, f0, rtol, atol, t_end) -> float:
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_end)
    f1 = fun(y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_end)


def dopri5(fun: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, t_out: np.ndarray,
           rtol: float = 1e-8, atol: float = 1e-10,
           observe: Callable[[np.ndarray], object] = lambda y: y.copy(),
           post_step: Callable[[np.ndarray], np.ndarray] | None = None,
           max_steps: int = 10_000_000) -> tuple[list, dict]:
    """Integrate the autonomous system ``y' = fun(y)`` from t = 0.

    Returns ``observe(y(t))`` for every ``t`` in ``t_out`` (ascending, >= 0), and a
    stats dict. ``post_step`` maps each accepted state (e.g. re-symmetrization).
    """
    t_out = np.asarray(t_out, dtype=float)
    if t_out.ndim != 1 or t_out.size == 0 or t_out[0] < 0 or np.any(np.diff(t_out) < 0):
        raise ValueError("t_out must be a nonempty ascending grid starting at >= 0")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    y = np.array(y0, dtype=np.complex128)
    t_end = float(t_out[-1])
    out: list = []
    j = 0
    while j < t_out.size and t_out[j] <= 0.0:
        out.append(observe(y))
        j += 1
    stats = {"steps": 0, "rejected": 0, "rhs_evals": 0}
    if j == t_out.size:
        return out, stats

    f = fun(y)
    stats["rhs_evals"] += 1
    h = _initial_step(fun, y, f, rtol, atol, t_end)
    stats["rhs_evals"] += 1
    t = 0.0
    K = np.empty((7,) + y.shape, dtype=np.complex128)
    flat = K.reshape(7, -1)
    a_rows = [np.array(row) for row in A]
    while j < t_out.size:
        if stats["steps"] + stats["rejected"] > max_steps:
            raise IntegratorError(f"exceeded {max_steps} steps at t={t:.6g}")
        min_h = 16 * np.spacing(max(abs(t), 1.0))
        if h < min_h:
            raise IntegratorError(f"step size underflow at t={t:.6g}")
        h = min(h, t_end - t)
        K[0] = f
        for s in range(1, 6):
            dy = (a_rows[s] @ flat[:s]).reshape(y.shape)
            K[s] = fun(y + h * dy)
        y_new = y + h * (B @ flat[:6]).reshape(y.shape)
        K[6] = fun(y_new)
        stats["rhs_evals"] += 6
        err = (E @ flat).reshape(y.shape)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(h * err / scale)
        if not np.isfinite(err_norm):
            raise IntegratorError(f"non-finite error estimate at t={t:.6g}")
        if err_norm > 1.0:
            stats["rejected"] += 1
            h *= max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
            continue

        t_new = t + h if t_end - (t + h) > 1e-12 * max(1.0, t_end) else t_end
        if j < t_out.size and t_out[j] <= t_new:
            Q = (P.T @ flat).reshape((4,) + y.shape)
            while j < t_out.size and t_out[j] <= t_new:
                x = (t_out[j] - t) / h
                yj = y + h * (x * Q[0] + x**2 * Q[1] + x**3 * Q[2] + x**4 * Q[3])
                if post_step is not None:
                    yj = post_step(yj)
                out.append(observe(yj))
                j += 1
        y = post_step(y_new) if post_step is not None else y_new
        f = K[6].copy()
        t = t_new
        stats["steps"] += 1
        factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
        h *= factor
    return out, stats
