"""Kerr-oscillator time evolution with thermal damping and dephasing.

All dynamics live in the frame rotating at the mechanical frequency, where the
Hamiltonian is ``g (n^2 - n)``. The master equation is

    d rho/dt = -i g [n^2 - n, rho] + gamma (n_th + 1) D[a] rho
               + gamma n_th D[a^dag] rho + gamma_phi D[n] rho.

Every term is banded in the Fock basis, so the right-hand side is evaluated
elementwise in O(n_max^2) instead of with dense matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import log1p
from typing import Sequence, Union

import numpy as np
from scipy.constants import hbar

from .errors import (
    ConfigError,
    CutoffLeak,
    DimensionMismatch,
    NoConvergence,
    NonPositiveRate,
    ToleranceNotMet,
)
from .fock import DensityMatrix, FockVector, State, as_density
from .integrate import IntegrationStats, dopri5

TRACE_DRIFT_TOL = 1e-8
OUTPUT_POSITIVITY_TOL = 1e-7
LEAK_TOL = 1e-6


@dataclass(frozen=True)
class SimulationParams:
    g: float
    gamma: float = 0.0
    n_th: float = 0.0
    gamma_phi: float = 0.0
    n_max: int = 0

    def __post_init__(self):
        for name in ("g", "gamma", "n_th", "gamma_phi"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {value!r}")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ConfigError(f"n_max must be a non-negative integer, got {self.n_max!r}")

    @property
    def Gamma_d(self) -> float:
        return self.gamma * (self.n_th + 0.5)

    @property
    def is_unitary(self) -> bool:
        return self.gamma == 0 and self.gamma_phi == 0

    @classmethod
    def from_ratios(
        cls,
        s: float,
        *,
        g: float = 1.0,
        gd_over_gs2: float = 0.0,
        gphi_over_g: float = 0.0,
        n_th: float = 1000.0,
        n_max: int,
    ) -> "SimulationParams":
        """Build rates from the dimensionless ratios ``Gamma_d/(g s^2)`` and ``gamma_phi/g``."""
        gamma_d = gd_over_gs2 * g * s**2
        return cls(
            g=g,
            gamma=gamma_d / (n_th + 0.5),
            n_th=n_th,
            gamma_phi=gphi_over_g * g,
            n_max=n_max,
        )


@dataclass(frozen=True)
class EvolutionConfig:
    t_samples: Sequence[float]
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    check_positivity: bool = True
    leak_tol: float = LEAK_TOL

    def __post_init__(self):
        t = np.asarray(self.t_samples, dtype=float)
        if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
            raise ConfigError("t_samples must be a non-empty sequence starting at 0")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("t_samples must be strictly increasing")
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.max_step <= 0:
            raise ConfigError("tolerances and max_step must be positive")
        object.__setattr__(self, "t_samples", tuple(float(x) for x in t))


def rescaled_time(t, g: float, s: float):
    """``tau = g t s^4``."""
    return np.asarray(t) * g * s**4 if np.ndim(t) else t * g * s**4


def physical_time(tau, g: float, s: float):
    return np.asarray(tau) / (g * s**4) if np.ndim(tau) else tau / (g * s**4)


def kerr_energies(n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1, dtype=float)
    return n * n - n


def evolve_unitary(state: State, g: float, t: float) -> State:
    """Exact Kerr propagation: ``c_n -> c_n exp(-i g (n^2 - n) t)``."""
    if isinstance(state, FockVector):
        phase = np.exp(-1j * g * t * kerr_energies(state.n_max))
        return FockVector.normalized(state.amplitudes * phase)
    phase = np.exp(-1j * g * t * kerr_energies(state.n_max))
    rho = state.elements * np.outer(phase, phase.conj())
    return DensityMatrix.from_array(rho)


@lru_cache(maxsize=8)
def _index_arrays(n_max: int):
    n = np.arange(n_max + 1, dtype=float)
    # diag(a a^dag) in the truncated basis: the top level has no partner above it
    aad = np.where(np.arange(n_max + 1) < n_max, n + 1, 0.0)
    up = np.sqrt(np.outer(n[1:], n[1:]))  # multiplies rho[m+1, n+1] into slot [m, n]
    offset = np.subtract.outer(np.arange(n_max + 1), np.arange(n_max + 1))
    return n, aad, up, offset


def _decay_matrix(params: SimulationParams) -> np.ndarray:
    n, aad, _, _ = _index_arrays(params.n_max)
    c_down = params.gamma * (params.n_th + 1)
    c_up = params.gamma * params.n_th
    return 0.5 * c_down * np.add.outer(n, n) + 0.5 * c_up * np.add.outer(aad, aad)


def lindblad_rhs(rho: Union[DensityMatrix, np.ndarray], params: SimulationParams) -> np.ndarray:
    """Time derivative of ``rho`` under the full master equation."""
    r = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if r.shape != (params.n_max + 1, params.n_max + 1):
        raise DimensionMismatch(
            f"rho has shape {r.shape} but params.n_max={params.n_max}"
        )
    _, _, up, offset = _index_arrays(params.n_max)
    energies = kerr_energies(params.n_max)
    c_down = params.gamma * (params.n_th + 1)
    c_up = params.gamma * params.n_th

    out = -1j * params.g * np.subtract.outer(energies, energies) * r
    out -= 0.5 * params.gamma_phi * offset.astype(float) ** 2 * r
    if params.gamma:
        out -= _decay_matrix(params) * r
        out[:-1, :-1] += c_down * up * r[1:, 1:]
        out[1:, 1:] += c_up * up * r[:-1, :-1]
    return out


class _InteractionFrame:
    """Master equation in the frame that removes the Kerr and dephasing terms.

    Both removed terms act elementwise on ``rho_mn``; damping only couples
    ``rho_mn`` to ``rho_{m+-1, n+-1}``, whose Kerr phase differs by
    ``exp(-+2 i g (m - n) t)`` and whose dephasing factor is identical. The
    remaining generator therefore has only slow time dependence.
    """

    def __init__(self, params: SimulationParams):
        self.params = params
        n, _, up, offset = _index_arrays(params.n_max)
        self.m_idx = n
        self.c_down_up = params.gamma * (params.n_th + 1) * up
        self.c_up_up = params.gamma * params.n_th * up
        self.decay = _decay_matrix(params)
        self.offset = offset
        self.energies = kerr_energies(params.n_max)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        # q_mn = exp(-2 i g (m - n) t) = w^m conj(w)^n
        w = np.exp(-2j * self.params.g * t * self.m_idx)
        q = np.outer(w, w.conj())
        out = -self.decay * y
        out[:-1, :-1] += self.c_down_up * q[:-1, :-1] * y[1:, 1:]
        out[1:, 1:] += self.c_up_up * q[1:, 1:].conj() * y[:-1, :-1]
        return out

    def to_lab(self, t: float, y: np.ndarray) -> np.ndarray:
        phase = np.exp(-1j * self.params.g * t * self.energies)
        lab = y * np.outer(phase, phase.conj())
        if self.params.gamma_phi:
            lab = lab * np.exp(-0.5 * self.params.gamma_phi * t * self.offset.astype(float) ** 2)
        return lab


def _hermitize(y: np.ndarray) -> np.ndarray:
    return 0.5 * (y + y.conj().T)


def evolve_master(
    rho0: State,
    params: SimulationParams,
    cfg: EvolutionConfig,
    stats: IntegrationStats = None,
) -> list:
    """Integrate the master equation and return the state at every ``cfg.t_samples``.

    Damping is integrated with an adaptive Dormand-Prince pair in the
    interaction frame; Kerr and dephasing factors are applied exactly. The
    state is re-symmetrised after each accepted step.
    """
    rho0 = as_density(rho0)
    if rho0.n_max != params.n_max:
        raise DimensionMismatch(f"rho0 has n_max={rho0.n_max}, params.n_max={params.n_max}")
    frame = _InteractionFrame(params)
    times = np.asarray(cfg.t_samples)
    y0 = np.array(rho0.elements)

    if params.gamma == 0:
        tilde = [y0] * len(times)
    else:
        tilde = dopri5(
            frame.rhs,
            y0,
            times,
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            max_step=cfg.max_step,
            project=_hermitize,
            project_commutes=True,
            stats=stats,
        )

    out = []
    for t, y in zip(times, tilde):
        lab = _hermitize(frame.to_lab(t, y))
        trace = np.trace(lab).real
        if stats is not None:
            stats.trace_errors.append(abs(trace - 1.0))
        if abs(trace - 1.0) > TRACE_DRIFT_TOL:
            raise ToleranceNotMet(f"trace drifted to {trace!r} at t={t:.6g}")
        top = lab[-1, -1].real
        if params.n_max > 0 and top > cfg.leak_tol:
            raise CutoffLeak(
                f"population {top:.3g} at n=n_max={params.n_max} exceeds {cfg.leak_tol:.1g} "
                f"at t={t:.6g}; increase n_max"
            )
        # renormalise away the sub-1e-8 drift so the DensityMatrix contract holds
        rho_t = DensityMatrix(lab / trace)
        if cfg.check_positivity:
            lam = rho_t.min_eigenvalue()
            if lam < -OUTPUT_POSITIVITY_TOL:
                raise ToleranceNotMet(f"eigenvalue {lam:.3g} < 0 at t={t:.6g}")
        out.append(rho_t)
    return out


def decay_time(gamma: float, n_th: float) -> float:
    """Time after which damping alone has removed all Wigner negativity."""
    if not gamma > 0:
        raise NonPositiveRate(f"gamma must be > 0, got {gamma!r}")
    if n_th < 0:
        raise ConfigError("n_th must be non-negative")
    return log1p(1.0 / (2.0 * n_th + 1.0)) / gamma


def damped_variance(var0, gamma: float, n_th: float, t):
    """Quadrature variance of a Gaussian state under damping only."""
    decay = np.exp(-gamma * np.asarray(t, dtype=float))
    gamma_d = gamma * (n_th + 0.5)
    return var0 * decay + gamma_d / (2 * gamma) * (1 - decay)


def damped_mean_n(n0, gamma: float, n_th: float, t):
    decay = np.exp(-gamma * np.asarray(t, dtype=float))
    return n_th + (n0 - n_th) * decay


def coupling_from_device(m: float, omega_m: float, beta: float) -> float:
    """Kerr rate ``g = 3 hbar beta / (8 m^2 Omega_m^2)`` in rad/s."""
    return 3.0 * hbar * beta / (8.0 * m**2 * omega_m**2)


def rotating_frame_frequency(
    m: float, omega_m: float, beta: float, *, max_iter: int = 100, rtol: float = 1e-12
) -> float:
    """Frame frequency ``omega_0`` that absorbs the Duffing-induced linear shift.

    Solves ``4 m^2 omega_0^2 (Omega_m - omega_0) + 3 hbar beta = 0`` for the
    root nearest ``Omega_m`` by Newton iteration on the shift
    ``delta = omega_0 - Omega_m``, which avoids cancellation when the shift is
    many orders of magnitude below ``Omega_m``.
    """
    if not (m > 0 and omega_m > 0):
        raise ConfigError("mass and frequency must be positive")
    c = 3.0 * hbar * beta

    def residual(d):
        return c - 4.0 * m**2 * (omega_m + d) ** 2 * d

    def scale(d):
        # the two terms that cancel at the root
        return max(abs(c), 4.0 * m**2 * (omega_m + d) ** 2 * abs(d))

    delta = 0.0
    for _ in range(max_iter):
        f = residual(delta)
        if abs(f) <= rtol * scale(delta):
            return omega_m + delta
        w = omega_m + delta
        df = -4.0 * m**2 * (w * w + 2.0 * w * delta)
        step = -f / df
        # safeguard: never let the frame frequency cross zero
        while omega_m + delta + step <= 0:
            step *= 0.5
        delta += step
    if abs(residual(delta)) <= rtol * scale(delta):
        return omega_m + delta
    raise NoConvergence(f"rotating-frame root did not converge in {max_iter} iterations")
