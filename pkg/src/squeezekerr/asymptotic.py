"""Large-squeezing limit of the Wigner dynamics in rescaled coordinates.

With ``x~ = s x``, ``y~ = y / s`` and ``tau = g t s^4`` the leading-order
equation of motion is linear in ``d/dx~`` with ``y~``-dependent coefficients,

    dW/dtau = -2 y~^3 dW/dx~ - (y~/8) d^3W/dx~^3
              + (a/4 + b y~^2/2) d^2W/dx~^2,

where ``a = Gamma_d / (g s^2)`` and ``b = gamma_phi / g``. Each ``y~`` row
evolves independently and is diagonal in the Fourier variable ``k``:

    W(x~, y~, tau) = (2 pi)^(-1/2) int dk h(k) exp(i k x~)
                     * exp(i tau (-2 k y~^3 + k^3 y~ / 8))
                     * exp(-(a/4 + b y~^2/2) k^2 tau).

The solution therefore depends on ``(tau, a, b)`` only. The cubic transport
term is a rigid shift ``x~ -> x~ - 2 tau y~^3`` of each row; the negativity is
computed in the sheared coordinate ``x' = x~ - 2 tau y~^3`` where every row is
compact (the shear preserves area, so the negative volume is unchanged).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, pi, sqrt
from typing import Callable, Optional

import numpy as np
import scipy.fft
from scipy.integrate import trapezoid

from .errors import ConfigError, QuadratureNotConverged, WindowExhausted
from .wigner import MaxNegativityResult, negativity_of_values, refine_maximum

K_MAX = 14.0
DEFAULT_NODES = 2048
QUAD_TOL = 1e-8
MAX_DOUBLINGS = 4


@dataclass(frozen=True)
class AsymptoticParams:
    s: float
    g: float = 1.0
    Gamma_d: float = 0.0
    gamma_phi: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if not self.s >= 1.0:
            raise ConfigError(f"squeezing factor must satisfy s >= 1, got {self.s!r}")
        if not self.g > 0:
            raise ConfigError("the rescaled solution needs g > 0")
        if self.Gamma_d < 0 or self.gamma_phi < 0:
            raise ConfigError("decoherence rates must be non-negative")
        if self.tau < 0:
            raise ConfigError("tau must be non-negative")

    @classmethod
    def from_ratios(cls, tau: float, gd_over_gs2: float = 0.0, gphi_over_g: float = 0.0,
                    s: float = 6.0, g: float = 1.0) -> "AsymptoticParams":
        return cls(s=s, g=g, Gamma_d=gd_over_gs2 * g * s * s, gamma_phi=gphi_over_g * g, tau=tau)

    @property
    def t(self) -> float:
        return self.tau / (self.g * self.s**4)

    @property
    def damping_ratio(self) -> float:
        return self.Gamma_d / (self.g * self.s**2)

    @property
    def dephasing_ratio(self) -> float:
        return self.gamma_phi / self.g

    def with_tau(self, tau: float) -> "AsymptoticParams":
        return AsymptoticParams(self.s, self.g, self.Gamma_d, self.gamma_phi, tau)


@dataclass(frozen=True)
class RescaledGrid:
    """Cell-centred rectangular grid over ``(x~, y~)``."""

    x_max: float = 3.0
    y_max: float = 3.0
    delta_x: float = 1 / 80
    delta_y: Optional[float] = None

    def __post_init__(self):
        if self.delta_y is None:
            object.__setattr__(self, "delta_y", self.delta_x)
        for half, step in ((self.x_max, self.delta_x), (self.y_max, self.delta_y)):
            if not (half > 0 and step > 0):
                raise ConfigError("grid extents and steps must be positive")
            ratio = 2 * half / step
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                raise ConfigError(f"2*half_width/step must be an integer, got {ratio!r}")

    @staticmethod
    def _axis(half, step):
        n = int(round(2 * half / step))
        return (np.arange(n) - (n - 1) / 2) * step

    @property
    def x(self) -> np.ndarray:
        return self._axis(self.x_max, self.delta_x)

    @property
    def y(self) -> np.ndarray:
        return self._axis(self.y_max, self.delta_y)

    @property
    def cell_area(self) -> float:
        return self.delta_x * self.delta_y

    @property
    def shape(self):
        return (self.x.size, self.y.size)

    def to_dict(self) -> dict:
        return {
            "x_max": self.x_max,
            "y_max": self.y_max,
            "delta_x": self.delta_x,
            "delta_y": self.delta_y,
            "n_x": self.x.size,
            "n_y": self.y.size,
        }


@dataclass(frozen=True, eq=False)
class RescaledField:
    """``values[i, j] = W~(x~_i, y~_j)``."""

    grid: RescaledGrid
    values: np.ndarray
    frame: str = "rescaled"

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            raise ConfigError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def total(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)


def initial_slice_transform(y_tilde: float) -> Callable[[np.ndarray], np.ndarray]:
    """Fourier transform in ``x~`` of the rescaled squeezed vacuum at fixed ``y~``."""
    amp = np.exp(-2.0 * y_tilde**2) / pi

    def h(k):
        k = np.asarray(k, dtype=float)
        return amp * np.exp(-(k**2) / 8.0)

    return h


def numeric_slice_transform(w0_row: Callable[[np.ndarray], np.ndarray], k, half_width=10.0,
                            n=8001) -> np.ndarray:
    """``(2 pi)^(-1/2) int dx~ w0_row(x~) exp(-i k x~)`` by the trapezoid rule.

    For initial states without a closed-form slice transform; the integrand
    must be negligible beyond ``half_width``.
    """
    x = np.linspace(-half_width, half_width, n)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    vals = w0_row(x)
    kernel = np.exp(-1j * np.outer(k, x))
    return trapezoid(kernel * vals, x, axis=1) / sqrt(2 * pi)


def _row_spectrum(params: AsymptoticParams, y: np.ndarray, k: np.ndarray,
                  shear: bool) -> np.ndarray:
    """``h(k) U(k, y) D(k, y)`` for every row ``y`` (rows) and node ``k`` (columns)."""
    tau = params.tau
    a, b = params.damping_ratio, params.dephasing_ratio
    y = y[:, None]
    k = k[None, :]
    phase = tau * (k**3) * y / 8.0
    if not shear:
        phase = phase - 2.0 * tau * k * y**3
    decay = (a / 4.0 + b * y * y / 2.0) * k * k * tau
    amp = np.exp(-2.0 * y * y - k * k / 8.0 - decay) / pi
    return amp * np.exp(1j * phase)


def _direct_sum(params, grid, n_nodes, k_max):
    dk = 2.0 * k_max / n_nodes
    k = np.arange(n_nodes // 2 + 1) * dk
    spec = _row_spectrum(params, grid.y, k, shear=False)  # (ny, nk)
    spec[:, 1:] *= 2.0
    phase = np.outer(grid.x, k)
    w = np.cos(phase) @ np.ascontiguousarray(spec.real.T) - np.sin(phase) @ np.ascontiguousarray(
        spec.imag.T
    )
    return w * dk / sqrt(2 * pi)


def asymptotic_wigner(params: AsymptoticParams, grid: RescaledGrid = RescaledGrid(), *,
                      n_nodes: int = DEFAULT_NODES, k_max: float = K_MAX,
                      tol: float = QUAD_TOL) -> RescaledField:
    """Rescaled Wigner function on ``grid`` by trapezoid quadrature over ``k``.

    The node count is doubled until two successive results agree to ``tol``
    at every grid point.
    """
    w = _direct_sum(params, grid, n_nodes, k_max)
    for _ in range(MAX_DOUBLINGS):
        n_nodes *= 2
        w_fine = _direct_sum(params, grid, n_nodes, k_max)
        diff = float(np.max(np.abs(w_fine - w)))
        w = w_fine
        if diff <= tol:
            return RescaledField(grid, w)
    raise QuadratureNotConverged(
        f"k-quadrature still changing by {diff:.3g} after {MAX_DOUBLINGS} doublings"
    )


def _sheared_rows(params, y, dx, period_min, k_max, chunk=64):
    """Rows of ``W(x' + 2 tau y^3, y)`` on a periodic ``x'`` lattice of step ``dx``.

    Uses the fact that a uniform trapezoid sum over ``k`` evaluated on the
    lattice ``x'_m = m dx`` is a discrete Fourier transform whose period
    ``2 pi / dk`` is the alias window of the quadrature.
    """
    # a lattice coarser than pi / k_max cannot carry every node; sample a finer
    # one and keep every p-th point
    p = int(dx * k_max / pi) + 1
    m = p * scipy.fft.next_fast_len(int(ceil(period_min / dx)), real=True)
    dk = 2.0 * pi / (m * dx / p)
    n_k = int(k_max / dk) + 1
    k = np.arange(n_k) * dk
    out = np.empty((y.size, m // p))
    for start in range(0, y.size, chunk):
        spec = _row_spectrum(params, y[start:start + chunk], k, shear=True)
        half = np.zeros((spec.shape[0], m // 2 + 1), dtype=complex)
        half[:, :n_k] = spec
        full = scipy.fft.irfft(half, n=m, axis=1) * (m * dk / sqrt(2 * pi))
        out[start:start + chunk] = full[:, ::p]
    return out, m // p


def asymptotic_negativity(params: AsymptoticParams, grid: Optional[RescaledGrid] = None, *,
                          delta: float = 1 / 80, y_max: float = 3.0,
                          nodes: int = DEFAULT_NODES, k_max: float = K_MAX,
                          check: bool = True, tol: float = QUAD_TOL) -> float:
    """Negative volume of the rescaled Wigner function.

    With an explicit ``grid`` the field is evaluated there by
    :func:`asymptotic_wigner`. Without one, each row is evaluated in the
    sheared frame on a lattice of step ``delta`` whose length is set by the
    k-quadrature (at least ``nodes`` trapezoid nodes on ``[-k_max, k_max]``),
    so nothing is cut off however far the rows have moved. ``check`` repeats
    the evaluation with twice the node density and raises
    :class:`QuadratureNotConverged` if any sample moves by more than ``tol``.
    """
    if grid is not None:
        field = asymptotic_wigner(params, grid, n_nodes=nodes, k_max=k_max, tol=tol)
        return negativity_of_values(field.values, grid.cell_area)
    if params.tau == 0.0:
        return 0.0
    n_rows = int(round(2 * y_max / delta))
    # W(-x', -y) = W(x', y): only y > 0 rows are needed; each counts twice
    if n_rows % 2:
        y = np.arange(n_rows // 2 + 1) * delta
    else:
        y = (np.arange(n_rows // 2) + 0.5) * delta
    period = nodes * 2.0 * pi / (2.0 * k_max)
    rows, m = _sheared_rows(params, y, delta, period, k_max)
    if check:
        fine, m2 = _sheared_rows(params, y, delta, 2 * m * delta, k_max)
        # same lattice, doubled period: compare where both are defined
        idx = np.r_[0 : m // 2, m2 - (m - m // 2) : m2]
        diff = float(np.max(np.abs(fine[:, idx] - rows)))
        if diff > tol:
            raise QuadratureNotConverged(
                f"sheared k-quadrature changed by {diff:.3g} when the node density was doubled"
            )
    weight = np.full(y.size, 2.0)
    if n_rows % 2:
        weight[0] = 1.0
    neg = -np.minimum(rows, 0.0).sum(axis=1)
    return float((neg * weight).sum() * delta * delta)


def asymptotic_max_negativity(gd_over_gs2: float = 0.0, gphi_over_g: float = 0.0, *,
                              tau_max: float = 4.0, n_coarse: int = 40, tol: float = 1e-5,
                              refine: int = 4, s: float = 6.0, g: float = 1.0,
                              delta: float = 1 / 80) -> MaxNegativityResult:
    """Peak of the rescaled negativity over ``tau in [0, tau_max]`` (``t_star`` is a ``tau``)."""
    base = AsymptoticParams.from_ratios(0.0, gd_over_gs2, gphi_over_g, s=s, g=g)

    def evaluate(taus):
        return np.array([
            asymptotic_negativity(base.with_tau(float(t)), delta=delta, check=False) for t in taus
        ])

    result = refine_maximum(evaluate, np.linspace(0.0, tau_max, n_coarse), tol, refine)
    # one converged evaluation at the reported peak
    asymptotic_negativity(base.with_tau(result.t_star), delta=delta, check=True)
    return result


__all__ = [
    "AsymptoticParams",
    "RescaledGrid",
    "RescaledField",
    "initial_slice_transform",
    "numeric_slice_transform",
    "asymptotic_wigner",
    "asymptotic_negativity",
    "asymptotic_max_negativity",
    "WindowExhausted",
]
