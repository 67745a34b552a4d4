"""Wigner functions on square phase-space grids and their negative volume.

The convention is fixed by the vacuum, ``W = (2/pi) exp(-2 (x^2 + y^2))``,
with ``x``/``y`` the eigenvalues of ``X = (a + a^dag)/2``, ``Y = (a - a^dag)/(2i)``.

The production evaluator works in the position representation,

    W(x, y) = (2/pi) * integral du <x + u| rho |x - u> exp(-4 i y u),

with the integral done by the trapezoid rule on a lattice commensurate with
the grid. For states supported on a finite Fock range the integrand is smooth
and decays like a Gaussian, so the rule is exact to roundoff once the lattice
step resolves the largest momentum in the state (checked, not assumed). A
direct Laguerre-polynomial evaluator, :func:`wigner_laguerre`, is kept as an
independent reference for small cutoffs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, lgamma, pi, sqrt
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, WindowExhausted
from .fock import DensityMatrix, FockVector, State

# support radius beyond the classical turning point, in x units
SUPPORT_MARGIN = 6.0
# populations below this are treated as absent when sizing the support
SUPPORT_CUTOFF = 1e-30
WIGNER_BOUND = 2 / pi


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Square cell-centred grid: ``n_points`` cells of width ``delta_x`` spanning ``[-x_max, x_max]``."""

    x_max: float = 10.0
    delta_x: float = 1 / 40

    def __post_init__(self):
        if not (self.x_max > 0 and self.delta_x > 0):
            raise ConfigError("x_max and delta_x must be positive")
        ratio = 2 * self.x_max / self.delta_x
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(
                f"2*x_max/delta_x must be an integer (got {ratio!r}) so the grid tiles exactly"
            )

    @property
    def n_points(self) -> int:
        return int(round(2 * self.x_max / self.delta_x))

    @property
    def coords(self) -> np.ndarray:
        n = self.n_points
        return (np.arange(n) - (n - 1) / 2) * self.delta_x

    x = coords
    y = coords

    @property
    def cell_area(self) -> float:
        return self.delta_x**2

    def to_dict(self) -> dict:
        return {"x_max": self.x_max, "delta_x": self.delta_x, "n_points": self.n_points}


@dataclass(frozen=True, eq=False)
class WignerField:
    """``values[i, j] = W(x_i, y_j)`` on ``grid``."""

    grid: PhaseSpaceGrid
    values: np.ndarray
    frame: str = "lab"

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        n = self.grid.n_points
        if v.shape != (n, n):
            raise ConfigError(f"values shape {v.shape} does not match grid ({n}, {n})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def total(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)


# --------------------------------------------------------------------------
# Hermite functions
# --------------------------------------------------------------------------


def hermite_functions(x: np.ndarray, n_max: int) -> np.ndarray:
    """Oscillator eigenfunctions ``psi_n(x)``, ``n = 0..n_max``, normalised in ``x``.

    ``psi_0(x) = (2/pi)^(1/4) exp(-x^2)``. The three-term recurrence is run
    with a per-point logarithmic scale so that neither the Gaussian prefactor
    nor the polynomial growth under/overflows at large ``n``.
    """
    xi = sqrt(2.0) * np.asarray(x, dtype=float)
    out = np.empty((n_max + 1, xi.size))
    log_scale = -0.5 * xi**2
    prev = np.zeros_like(xi)
    cur = np.full_like(xi, pi**-0.25)
    out[0] = cur * np.exp(log_scale)
    big = 1e150
    for n in range(n_max):
        nxt = sqrt(2.0 / (n + 1)) * xi * cur - sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        over = np.abs(cur) > big
        if over.any():
            cur[over] /= big
            prev[over] /= big
            log_scale[over] += np.log(big)
        out[n + 1] = cur * np.exp(log_scale)
    return out * 2**0.25


@lru_cache(maxsize=4)
def _hermite_lattice(n_max: int, h: float, offset: float, m_lo: int, m_hi: int) -> np.ndarray:
    z = (np.arange(m_lo, m_hi + 1) + offset) * h
    table = hermite_functions(z, n_max)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=4)
def _fourier_kernels(h: float, j_max: int, y_key: tuple):
    y = np.asarray(y_key)
    u = np.arange(j_max + 1) * h
    phase = 4.0 * np.outer(u, y)
    cos, sin = np.cos(phase), np.sin(phase)
    # trapezoid weights for the even-symmetric sum over u in (-J h, J h)
    cos[1:] *= 2.0
    sin[1:] *= 2.0
    return cos, sin


def _effective_cutoff(state: State) -> int:
    p = state.populations
    idx = np.nonzero(p > SUPPORT_CUTOFF * p.max())[0]
    return int(idx[-1]) if idx.size else 0


def _lattice(grid: PhaseSpaceGrid, n_eff: int):
    """Position lattice ``z_m = (m + offset) h`` shared by every ``x_i +- u_j``.

    ``h = delta_x / q`` is the largest step that keeps the aliases of the
    u-sum (at ``y +- pi/(2h)``) clear of both the state and the grid.
    """
    radius = sqrt(n_eff + 0.5) + SUPPORT_MARGIN
    y_reach = grid.x_max + grid.delta_x / 2
    q = max(1, ceil(2.0 * grid.delta_x * (radius + y_reach + 2.0) / pi))
    h = grid.delta_x / q
    n = grid.n_points
    # x_i / h = q (i - (n-1)/2) is a half-integer only when q is odd and n even
    offset = 0.5 if (q % 2 == 1 and n % 2 == 0) else 0.0
    m_hi = int(np.floor(radius / h - offset))
    m_lo = -int(np.floor(radius / h + offset))
    centre = np.rint(q * (np.arange(n) - (n - 1) / 2) - offset).astype(int)
    return h, offset, m_lo, m_hi, centre


def wigner_of_density(state: State, grid: PhaseSpaceGrid) -> WignerField:
    """Wigner function of a pure or mixed state sampled on ``grid``."""
    n_eff = _effective_cutoff(state)
    h, offset, m_lo, m_hi, centre = _lattice(grid, n_eff)
    phi = _hermite_lattice(n_eff, h, offset, m_lo, m_hi)  # (n_eff+1, n_z)

    j_max = (m_hi - m_lo) // 2 + 1
    j = np.arange(j_max + 1)
    a = centre[:, None] + j[None, :]
    b = centre[:, None] - j[None, :]
    valid = (a >= m_lo) & (a <= m_hi) & (b >= m_lo) & (b <= m_hi)
    a = np.where(valid, a - m_lo, 0)
    b = np.where(valid, b - m_lo, 0)

    if isinstance(state, FockVector):
        psi = state.amplitudes[: n_eff + 1] @ phi
        corr = psi[a] * psi[b].conj()
    else:
        rho = state.elements[: n_eff + 1, : n_eff + 1]
        # real BLAS products; .real/.imag views are strided and would bypass BLAS
        re = phi.T @ (np.ascontiguousarray(rho.real) @ phi)
        im = phi.T @ (np.ascontiguousarray(rho.imag) @ phi)
        corr = re[a, b] + 1j * im[a, b]
    corr[~valid] = 0.0

    cos, sin = _fourier_kernels(h, j_max, tuple(grid.coords))
    w = np.ascontiguousarray(corr.real) @ cos + np.ascontiguousarray(corr.imag) @ sin
    w *= 2.0 / pi * h
    return WignerField(grid, w)


def wigner_laguerre(state: State, x, y) -> np.ndarray:
    """Reference evaluation from Laguerre closed forms of ``|m><n|``.

    ``W_mn(alpha) = (2/pi) (-1)^n sqrt(n!/m!) (2 conj(alpha))^(m-n)
    exp(-2|alpha|^2) L_n^(m-n)(4|alpha|^2)`` for ``m >= n``, with
    ``alpha = x + i y``. The upward recurrence in ``n`` is evaluated per
    off-diagonal; cost is O(n_max^2) per point, so keep cutoffs small.
    """
    rho = state.density().elements if isinstance(state, FockVector) else state.elements
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    alpha_c = x - 1j * y
    r2 = 4.0 * (x * x + y * y)
    dim = rho.shape[0]
    total = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for k in range(dim):
        # normalised Laguerre terms l_n = sqrt(n!/(n+k)!) L_n^k(r2) via the standard recurrence
        l_prev = np.zeros_like(r2)
        l_cur = np.full_like(r2, np.exp(-0.5 * lgamma(k + 1.0)))
        acc = np.zeros_like(total)
        for nn in range(dim - k):
            acc = acc + (-1) ** nn * rho[nn + k, nn] * l_cur
            # L_{n+1}^k = ((2n + k + 1 - r) L_n^k - (n + k) L_{n-1}^k) / (n + 1), rescaled
            l_next = (
                (2 * nn + k + 1 - r2) * l_cur
                - sqrt((nn + k) * nn) * l_prev
            ) / sqrt((nn + 1) * (nn + k + 1))
            l_prev, l_cur = l_cur, l_next
        term = acc * (2.0 * alpha_c) ** k
        total += term if k == 0 else 2.0 * term.real
    return (2.0 / pi) * np.exp(-0.5 * r2) * total.real


def wigner_point(state: State, x: float, y: float) -> float:
    return float(wigner_laguerre(state, np.array(x), np.array(y)))


# --------------------------------------------------------------------------
# Negativity
# --------------------------------------------------------------------------


def negativity_of_values(values: np.ndarray, cell_area: float) -> float:
    """``-sum(min(W, 0)) * cell_area`` with a fixed row-major reduction order."""
    neg = np.minimum(values, 0.0)
    # 0.0 - x rather than -x so an all-positive field gives +0.0
    return float(0.0 - neg.sum(axis=1).sum() * cell_area)


def negativity(field: WignerField) -> float:
    return negativity_of_values(field.values, field.grid.cell_area)


@dataclass
class RefinementStage:
    times: np.ndarray
    values: np.ndarray


@dataclass
class MaxNegativityResult:
    t_star: float
    n_star: float
    trace: list = field(default_factory=list)

    @property
    def evaluations(self) -> int:
        return sum(len(stage.times) for stage in self.trace)


def refine_maximum(
    evaluate: Callable[[np.ndarray], np.ndarray],
    t_coarse: Sequence[float],
    tol: float = 1e-5,
    refine: int = 4,
    max_stages: int = 25,
) -> MaxNegativityResult:
    """Maximise a sampled function of time by consecutive interval refinement.

    The coarse scan is evaluated first; around the running maximum the
    neighbouring intervals are subdivided ``refine``-fold until both
    neighbours differ from the maximum by less than ``tol``. Raises
    :class:`WindowExhausted` when the coarse maximum sits on the last sample.
    """
    if refine < 2:
        raise ConfigError("refine factor must be >= 2")
    t = np.asarray(t_coarse, dtype=float)
    vals = np.asarray(evaluate(t), dtype=float)
    trace = [RefinementStage(t.copy(), vals.copy())]
    if int(np.argmax(vals)) == len(t) - 1:
        raise WindowExhausted(
            f"negativity still rising at the end of the scan (t={t[-1]:.6g})",
            t_last=float(t[-1]),
            n_last=float(vals[-1]),
        )
    t_end = t[-1]
    for _ in range(max_stages):
        i = int(np.argmax(vals))
        nbrs = [k for k in (i - 1, i + 1) if 0 <= k < len(t)]
        if max(abs(vals[i] - vals[k]) for k in nbrs) < tol:
            break
        new = []
        for k in nbrs:
            lo, hi = sorted((t[k], t[i]))
            new.extend(lo + (hi - lo) * np.arange(1, refine) / refine)
        new = np.array(sorted(new))
        new_vals = np.asarray(evaluate(new), dtype=float)
        trace.append(RefinementStage(new, new_vals))
        t = np.concatenate([t, new])
        vals = np.concatenate([vals, new_vals])
        order = np.argsort(t, kind="stable")
        t, vals = t[order], vals[order]
    else:
        raise WindowExhausted(
            f"refinement did not reach tol={tol:g} after {max_stages} stages", None, None
        )
    i = int(np.argmax(vals))
    if t[i] == t_end:
        raise WindowExhausted("maximum drifted to the end of the scan", float(t[i]), float(vals[i]))
    return MaxNegativityResult(float(t[i]), float(vals[i]), trace)


class NegativityTrajectory:
    """Negativity ``N(t)`` of one evolving state, evaluated on demand.

    Keeps every evaluated state as a checkpoint so refinement only integrates
    from the nearest earlier time.
    """

    def __init__(self, state0: State, params, grid: PhaseSpaceGrid, evolution=None):
        from .dynamics import EvolutionConfig  # noqa: F401  (type reference only)

        self.state0 = state0
        self.params = params
        self.grid = grid
        self.evolution = evolution or {}
        self.checkpoints = {0.0: state0}
        self.cache = {}

    def states(self, times: np.ndarray) -> list:
        from .dynamics import EvolutionConfig, evolve_master, evolve_unitary

        times = np.asarray(times, dtype=float)
        if self.params.is_unitary:
            return [evolve_unitary(self.state0, self.params.g, t) for t in times]
        order = np.argsort(times)
        result = [None] * len(times)
        pending = [(times[k], k) for k in order]
        while pending:
            start = max(c for c in self.checkpoints if c <= pending[0][0])
            rel = [t - start for t, _ in pending if t > start]
            idx = [k for t, k in pending if t > start]
            for t, k in pending:
                if t == start:
                    result[k] = self.checkpoints[start]
            if rel:
                cfg = EvolutionConfig([0.0] + rel, **self.evolution)
                out = evolve_master(self.checkpoints[start], self.params, cfg)[1:]
                for k, rho in zip(idx, out):
                    result[k] = rho
                    self.checkpoints[float(times[k])] = rho
            pending = []
        return result

    def __call__(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        todo = [t for t in times if float(t) not in self.cache]
        if todo:
            for t, st in zip(todo, self.states(np.array(todo))):
                self.cache[float(t)] = negativity(wigner_of_density(st, self.grid))
        return np.array([self.cache[float(t)] for t in times])


def max_negativity(
    rho0: State,
    params,
    grid: PhaseSpaceGrid,
    tol: float = 1e-5,
    *,
    t_max: float,
    n_coarse: int = 40,
    refine: int = 4,
    evolution: Optional[dict] = None,
) -> MaxNegativityResult:
    """Peak of ``N(t)`` over ``[0, t_max]`` by coarse scan plus refinement."""
    if t_max <= 0 or n_coarse < 3:
        raise ConfigError("need t_max > 0 and at least 3 coarse samples")
    traj = NegativityTrajectory(rho0, params, grid, evolution)
    return refine_maximum(traj, np.linspace(0.0, t_max, n_coarse), tol, refine)


def convergence_report(
    rho_source: Callable[[int], State],
    params,
    grids: Sequence[PhaseSpaceGrid],
    n_max_list: Sequence[int],
    *,
    t_max: float,
    reference_grid: PhaseSpaceGrid = PhaseSpaceGrid(10.0, 1 / 40),
    reference_n_max: int = 400,
    tol: float = 1e-5,
    n_coarse: int = 40,
    evolution: Optional[dict] = None,
) -> list:
    """Error of the maximum negativity relative to the finest setting, one knob at a time.

    ``rho_source(n_max)`` builds the initial state for a given cutoff; each
    entry of ``grids`` varies the grid at the reference cutoff and each entry
    of ``n_max_list`` varies the cutoff on the reference grid.
    """
    from dataclasses import replace

    def peak(grid, n_max):
        p = replace(params, n_max=n_max)
        try:
            res = max_negativity(
                rho_source(n_max), p, grid, tol, t_max=t_max, n_coarse=n_coarse, evolution=evolution
            )
            return res.n_star
        except WindowExhausted as exc:
            if exc.n_last is None:
                raise
            return exc.n_last

    ref = peak(reference_grid, reference_n_max)
    rows = [
        {
            "knob": "reference",
            "delta_x": reference_grid.delta_x,
            "x_max": reference_grid.x_max,
            "n_max": reference_n_max,
            "max_N": ref,
            "error": 0.0,
        }
    ]
    for grid in grids:
        if grid.delta_x != reference_grid.delta_x and grid.x_max != reference_grid.x_max:
            raise ConfigError("vary one knob at a time: grid changes both delta_x and x_max")
        if grid == reference_grid:
            continue
        knob = "delta_x" if grid.delta_x != reference_grid.delta_x else "x_max"
        value = peak(grid, reference_n_max)
        rows.append(
            {
                "knob": knob,
                "delta_x": grid.delta_x,
                "x_max": grid.x_max,
                "n_max": reference_n_max,
                "max_N": value,
                "error": abs(value - ref),
            }
        )
    for n_max in n_max_list:
        if n_max == reference_n_max:
            continue
        value = peak(reference_grid, n_max)
        rows.append(
            {
                "knob": "n_max",
                "delta_x": reference_grid.delta_x,
                "x_max": reference_grid.x_max,
                "n_max": n_max,
                "max_N": value,
                "error": abs(value - ref),
            }
        )
    return rows


# --------------------------------------------------------------------------
# Serialisation
# --------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "%.17g" % v


def field_to_csv(field) -> str:
    """Long-format ``x,y,W`` rows, x-major; works for lab and rescaled fields."""
    x, y = field.grid.x, field.grid.y
    buf = io.StringIO()
    buf.write("x,y,W\n")
    for i, xi in enumerate(x):
        row = field.values[i]
        for j, yj in enumerate(y):
            buf.write(f"{_fmt(xi)},{_fmt(yj)},{_fmt(row[j])}\n")
    return buf.getvalue()


def field_header(field: WignerField, extra: Optional[dict] = None) -> dict:
    header = {
        "format": "wigner-field",
        "version": 1,
        "frame": field.frame,
        "dtype": "<f8",
        "order": "row-major",
        "axes": ["x", "y"],
        "shape": list(field.values.shape),
        **field.grid.to_dict(),
    }
    if extra:
        header.update(extra)
    return header


def write_field_binary(field: WignerField, fh, extra: Optional[dict] = None) -> None:
    """One JSON header line, then the values as little-endian float64, x-major."""
    header = json.dumps(field_header(field, extra), sort_keys=True)
    fh.write(header.encode("utf-8") + b"\n")
    fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(fh):
    header = json.loads(fh.readline().decode("utf-8"))
    shape = tuple(header["shape"])
    data = np.frombuffer(fh.read(), dtype=header["dtype"]).reshape(shape)
    return header, data
