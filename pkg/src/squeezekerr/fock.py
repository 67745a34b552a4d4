"""Truncated Fock-space states and operators.

Quadratures follow the convention ``X = (a + a^dag)/2``, ``Y = (a - a^dag)/(2i)``
so that ``[X, Y] = i/2`` and the vacuum has ``Var(X) = Var(Y) = 1/4``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma, log, cosh, tanh
from typing import Union

import numpy as np

from .errors import ConfigError, CutoffTooSmall, DimensionMismatch

NORM_TOL = 1e-12
TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8
DEFAULT_TAIL_TOL = 1e-10


def _frozen(arr, dtype=complex):
    arr = np.array(arr, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FockVector:
    """Pure state amplitudes ``c_n`` for ``n = 0..n_max``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size < 1:
            raise ConfigError("amplitudes must be a non-empty 1-D sequence")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ConfigError(f"state is not normalised (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> "FockVector":
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amps / np.sqrt(np.vdot(amps, amps).real))

    @property
    def n_max(self) -> int:
        return self.amplitudes.size - 1

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density(self) -> "DensityMatrix":
        c = self.amplitudes
        return DensityMatrix(np.outer(c, c.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state on the truncated basis.

    Hermiticity and unit trace are checked on construction; positivity is an
    O(n^3) eigenvalue check and is only run on request via :meth:`min_eigenvalue`.
    """

    elements: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.elements)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise ConfigError(f"density matrix must be square, got shape {rho.shape}")
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > HERMITIAN_TOL:
            raise ConfigError(f"density matrix is not Hermitian (max|rho - rho^dag|={herm:.3g})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ConfigError(f"density matrix trace is {tr.real:.15g}, expected 1")
        object.__setattr__(self, "elements", rho)

    @classmethod
    def from_array(cls, rho, *, symmetrize=True, renormalize=False) -> "DensityMatrix":
        rho = np.asarray(rho, dtype=complex)
        if symmetrize:
            rho = 0.5 * (rho + rho.conj().T)
        if renormalize:
            rho = rho / np.trace(rho).real
        return cls(rho)

    @property
    def n_max(self) -> int:
        return self.elements.shape[0] - 1

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.elements)).copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.elements)[0])

    def is_positive(self, tol: float = POSITIVITY_TOL) -> bool:
        return self.min_eigenvalue() >= -tol

    def fidelity(self, other: Union["DensityMatrix", FockVector]) -> float:
        """Fidelity with a pure state, or overlap ``Tr(rho sigma)`` for two mixed states."""
        if other.n_max != self.n_max:
            raise DimensionMismatch(f"n_max {self.n_max} vs {other.n_max}")
        if isinstance(other, FockVector):
            c = other.amplitudes
            return float(np.real(np.vdot(c, self.elements @ c)))
        return float(np.real(np.trace(self.elements @ other.elements)))


State = Union[FockVector, DensityMatrix]


@dataclass(frozen=True)
class SqueezeSpec:
    """Squeezing factor ``s``; the state is squeezed along the x-quadrature."""

    s: float

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s < 1.0:
            raise ConfigError(f"squeezing factor must satisfy s >= 1, got {self.s!r}")

    @property
    def r(self) -> float:
        return log(self.s)

    @property
    def mean_n(self) -> float:
        return (self.s**2 + self.s**-2 - 2.0) / 4.0


def as_density(state: State) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    return state.density()


def make_vacuum(n_max: int) -> FockVector:
    if n_max < 0:
        raise ConfigError("n_max must be non-negative")
    c = np.zeros(n_max + 1, dtype=complex)
    c[0] = 1.0
    return FockVector(c)


def make_fock(n: int, n_max: int) -> FockVector:
    if not 0 <= n <= n_max:
        raise ConfigError(f"Fock index {n} outside 0..{n_max}")
    c = np.zeros(n_max + 1, dtype=complex)
    c[n] = 1.0
    return FockVector(c)


def make_coherent(alpha: complex, n_max: int) -> FockVector:
    """Coherent state, renormalised after truncation (test fixture)."""
    if alpha == 0:
        return make_vacuum(n_max)
    n = np.arange(n_max + 1)
    log_fact = np.array([lgamma(k + 1.0) for k in n])
    mag = np.exp(n * log(abs(alpha)) - 0.5 * log_fact - 0.5 * abs(alpha) ** 2)
    return FockVector.normalized(mag * np.exp(1j * np.angle(alpha) * n))


def thermal_state(n_th: float, n_max: int) -> DensityMatrix:
    """Geometric population distribution, renormalised on the truncated basis."""
    if n_th < 0:
        raise ConfigError("n_th must be non-negative")
    n = np.arange(n_max + 1)
    if n_th == 0:
        p = (n == 0).astype(float)
    else:
        p = np.exp(n * (log(n_th) - np.log1p(n_th)))
        p /= p.sum()
    return DensityMatrix(np.diag(p.astype(complex)))


def _squeezed_log_weights(s: float, k: np.ndarray) -> np.ndarray:
    """log |c_{2k}|^2 of the squeezed vacuum with r = ln s."""
    r = log(s)
    if r == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    lg = np.vectorize(lgamma)
    return (
        -log(cosh(r))
        + 2 * k * log(tanh(r))
        + lg(2 * k + 1.0)
        - 2 * k * log(2.0)
        - 2 * lg(k + 1.0)
    )


def squeezed_tail_mass(s: float, n_max: int) -> float:
    """Probability weight of the untruncated squeezed vacuum above ``n_max``."""
    if s == 1.0:
        return 0.0
    k0 = n_max // 2 + 1
    t2 = tanh(log(s)) ** 2
    # terms decay at least geometrically with ratio t2; sum until negligible
    n_terms = int(np.ceil(745.0 / -log(t2))) + 1
    k = np.arange(k0, k0 + n_terms)
    w = np.exp(_squeezed_log_weights(s, k))
    return float(w.sum())


def suggest_n_max(s: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest even cutoff whose truncated squeezed-vacuum tail is below ``tail_tol``."""
    SqueezeSpec(s)
    n = 0
    while squeezed_tail_mass(s, n) >= tail_tol:
        n += 2
    return n


def make_squeezed_vacuum(
    spec: SqueezeSpec, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL
) -> FockVector:
    """Squeezed vacuum with Wigner function ``(2/pi) exp(-2 x^2 s^2 - 2 y^2 / s^2)``.

    Uses the squeeze-operator expansion with ``r = ln s``; only even Fock
    levels are populated.
    """
    if isinstance(spec, (int, float)):
        spec = SqueezeSpec(float(spec))
    if n_max < 0:
        raise ConfigError("n_max must be non-negative")
    tail = squeezed_tail_mass(spec.s, n_max)
    if tail >= tail_tol:
        raise CutoffTooSmall(
            f"n_max={n_max} leaves tail mass {tail:.3g} >= {tail_tol:.3g} for s={spec.s}; "
            f"try n_max={suggest_n_max(spec.s, tail_tol)}"
        )
    k = np.arange(n_max // 2 + 1)
    c = np.zeros(n_max + 1, dtype=complex)
    c[0::2] = (-1.0) ** k * np.exp(0.5 * _squeezed_log_weights(spec.s, k))
    return FockVector.normalized(c)


def annihilation(n_max: int) -> np.ndarray:
    if n_max < 1:
        raise ConfigError("n_max must be at least 1 for a ladder operator")
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def number_operator(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(complex)


def ladder_operators(n_max: int):
    """Return ``(a, a_dag, n)`` as dense matrices."""
    a = annihilation(n_max)
    return a, a.conj().T.copy(), number_operator(n_max)


def _moments_raw(state: State):
    """Return <a>, <a^2>, <n> using the sub/superdiagonal structure directly."""
    if isinstance(state, FockVector):
        c = state.amplitudes
        n = np.arange(c.size)
        mean_a = np.vdot(c[:-1], np.sqrt(n[1:]) * c[1:]) if c.size > 1 else 0j
        mean_a2 = (
            np.vdot(c[:-2], np.sqrt(n[1:-1] * n[2:]) * c[2:]) if c.size > 2 else 0j
        )
        mean_n = float(np.sum(n * np.abs(c) ** 2))
        return complex(mean_a), complex(mean_a2), mean_n
    rho = state.elements
    n = np.arange(rho.shape[0])
    # Tr(rho a) = sum_n sqrt(n) rho_{n, n-1}
    mean_a = np.sum(np.sqrt(n[1:]) * np.diagonal(rho, -1)) if rho.shape[0] > 1 else 0j
    mean_a2 = (
        np.sum(np.sqrt(n[1:-1] * n[2:]) * np.diagonal(rho, -2)) if rho.shape[0] > 2 else 0j
    )
    mean_n = float(np.sum(n * np.real(np.diagonal(rho))))
    return complex(mean_a), complex(mean_a2), mean_n


def quadrature_moments(state: State) -> dict:
    """First and centred second moments of ``X``, ``Y`` and the mean phonon number."""
    mean_a, mean_a2, mean_n = _moments_raw(state)
    mx, my = mean_a.real, mean_a.imag
    ex2 = (2 * mean_a2.real + 2 * mean_n + 1) / 4
    ey2 = (-2 * mean_a2.real + 2 * mean_n + 1) / 4
    return {
        "mean_x": mx,
        "mean_y": my,
        "var_x": ex2 - mx**2,
        "var_y": ey2 - my**2,
        "cov_xy": mean_a2.imag / 2 - mx * my,
        "mean_n": mean_n,
    }
