"""Adaptive Dormand-Prince 5(4) integrator for array-valued linear ODEs.

Unlike ``scipy.integrate.solve_ivp`` this stepper works on arrays of any
shape and dtype (complex matrices included) and lets the caller project the
state after every accepted step, which is how the master-equation solver
keeps the density matrix exactly Hermitian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ToleranceNotMet

# Butcher tableau of Dormand & Prince (1980), 5th-order solution with FSAL
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_LOW

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ORDER = 5


@dataclass
class IntegrationStats:
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    step_sizes: list = field(default_factory=list)
    # |Tr rho - 1| at each output sample before renormalisation (filled by evolve_master)
    trace_errors: list = field(default_factory=list)


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _initial_step(fun, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / ORDER)
    return min(100 * h0, h1, span)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_eval: Sequence[float],
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = np.inf,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    project_commutes: bool = False,
    min_step_fraction: float = 1e-12,
    max_steps: int = 1_000_000,
    stats: Optional[IntegrationStats] = None,
):
    """Integrate ``dy/dt = fun(t, y)`` from ``t_eval[0]`` and return ``y`` at every ``t_eval``.

    Steps are clipped so that each requested time is hit exactly (no dense
    output interpolation). ``project`` is applied to every accepted state;
    with ``project_commutes=True`` the caller asserts ``fun(t, project(y)) ==
    project(fun(t, y))`` and the FSAL stage is projected instead of recomputed.
    Raises :class:`ToleranceNotMet` if the step size collapses below
    ``min_step_fraction`` of the integration span.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size == 0:
        raise ValueError("t_eval must be a non-empty 1-D sequence")
    if np.any(np.diff(t_eval) <= 0):
        raise ValueError("t_eval must be strictly increasing")
    if stats is None:
        stats = IntegrationStats()

    y = np.array(y0, copy=True)
    if project is not None:
        y = project(y)
    t = float(t_eval[0])
    out = [y.copy()]
    if t_eval.size == 1:
        return out

    span = float(t_eval[-1] - t_eval[0])
    h_min = min_step_fraction * span
    f = fun(t, y)
    stats.n_rhs += 1
    h = min(_initial_step(fun, t, y, f, rtol, atol, span), max_step)
    stats.n_rhs += 1

    k = [None] * 7
    for target in t_eval[1:]:
        while t < target:
            if stats.n_accepted + stats.n_rejected > max_steps:
                raise ToleranceNotMet(f"exceeded {max_steps} steps before t={target}")
            remaining = target - t
            h_try = min(h, max_step)
            last = h_try >= remaining * (1 - 1e-12)
            if last:
                h_try = remaining
            k[0] = f
            for i in range(1, 7):
                dy = sum(a * ki for a, ki in zip(_A[i], k[:i]) if a != 0.0)
                k[i] = fun(t + _C[i] * h_try, y + h_try * dy)
            stats.n_rhs += 6
            y_new = y + h_try * sum(b * ki for b, ki in zip(_B, k) if b != 0.0)
            err = h_try * sum(e * ki for e, ki in zip(_E, k) if e != 0.0)
            err_norm = _error_norm(err, y, y_new, rtol, atol)

            if err_norm <= 1.0:
                t = target if last else t + h_try
                if project is not None:
                    y_new = project(y_new)
                    if project_commutes:
                        f = project(k[6])
                    else:
                        f = fun(t, y_new)
                        stats.n_rhs += 1
                else:
                    f = k[6]
                y = y_new
                stats.n_accepted += 1
                stats.step_sizes.append(h_try)
                factor = MAX_FACTOR if err_norm == 0 else min(
                    MAX_FACTOR, SAFETY * err_norm ** (-1 / ORDER)
                )
                # a clipped final step says nothing about the natural step size
                h = max(h, h_try * factor) if last else h_try * factor
            else:
                stats.n_rejected += 1
                h = h_try * max(MIN_FACTOR, SAFETY * err_norm ** (-1 / ORDER))
                if h < h_min:
                    raise ToleranceNotMet(
                        f"step size {h:.3g} fell below {h_min:.3g} at t={t:.6g}"
                    )
        out.append(y.copy())
    return out
