import io
from math import exp, pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from squeezekerr.dynamics import SimulationParams
from squeezekerr.errors import ConfigError, WindowExhausted
from squeezekerr.fock import (
    DensityMatrix,
    SqueezeSpec,
    make_coherent,
    make_fock,
    make_squeezed_vacuum,
    make_vacuum,
    suggest_n_max,
    thermal_state,
)
from squeezekerr.wigner import (
    NegativityTrajectory,
    PhaseSpaceGrid,
    WignerField,
    convergence_report,
    field_to_csv,
    hermite_functions,
    max_negativity,
    negativity,
    read_field_binary,
    refine_maximum,
    wigner_laguerre,
    wigner_of_density,
    wigner_point,
    write_field_binary,
)

from conftest import random_density

SMALL = PhaseSpaceGrid(4.0, 1 / 10)


def test_grid_layout():
    g = PhaseSpaceGrid()
    assert g.n_points == 800
    assert g.coords[0] == pytest.approx(-10 + 1 / 80)
    assert np.allclose(g.coords, -g.coords[::-1])
    assert g.cell_area == pytest.approx(1 / 1600, rel=1e-15)
    with pytest.raises(ConfigError):
        PhaseSpaceGrid(1.0, 0.3)
    with pytest.raises(ConfigError):
        PhaseSpaceGrid(-1.0, 0.1)


def test_hermite_functions_orthonormal():
    x = np.linspace(-25, 25, 20001)
    psi = hermite_functions(x, 200)
    gram = psi @ psi.T * (x[1] - x[0])
    assert np.max(np.abs(gram - np.eye(201))) < 1e-10
    assert np.all(np.isfinite(hermite_functions(np.array([40.0]), 600)))


def test_vacuum_matches_gaussian():
    grid = PhaseSpaceGrid()
    w = wigner_of_density(make_vacuum(0), grid).values
    x = grid.coords
    ref = 2 / pi * np.exp(-2 * (x[:, None] ** 2 + x[None, :] ** 2))
    assert np.max(np.abs(w - ref)) < 1e-12


def test_fock_one_at_origin_and_negativity():
    one = make_fock(1, 1)
    assert wigner_point(one, 0.0, 0.0) == pytest.approx(-2 / pi, abs=1e-14)
    # radial oracle: N = -int_0^{1/2} 2 pi r (2/pi)(4 r^2 - 1) e^{-2 r^2} dr
    oracle, _ = quad(lambda r: -2 * pi * r * (2 / pi) * (4 * r * r - 1) * exp(-2 * r * r), 0, 0.5)
    assert oracle == pytest.approx(2 * exp(-0.5) - 1, rel=1e-12)
    n = negativity(wigner_of_density(one, PhaseSpaceGrid(6.0, 1 / 40)))
    assert n == pytest.approx(oracle, abs=1e-5)


def test_squeezed_vacuum_matches_gaussian():
    s = 4.5
    state = make_squeezed_vacuum(SqueezeSpec(s), suggest_n_max(s, 1e-14), tail_tol=1e-14)
    grid = PhaseSpaceGrid()
    w = wigner_of_density(state, grid).values
    x = grid.coords
    ref = 2 / pi * np.exp(-2 * s * s * x[:, None] ** 2 - 2 * x[None, :] ** 2 / (s * s))
    assert np.max(np.abs(w - ref)) < 1e-6


def test_coherent_and_thermal_states():
    alpha = 1.0 + 0.5j
    grid = PhaseSpaceGrid(5.0, 1 / 10)
    x = grid.coords
    w = wigner_of_density(make_coherent(alpha, 50), grid).values
    ref = 2 / pi * np.exp(-2 * ((x[:, None] - alpha.real) ** 2 + (x[None, :] - alpha.imag) ** 2))
    assert np.max(np.abs(w - ref)) < 1e-12
    n_th = 0.7
    w = wigner_of_density(thermal_state(n_th, 120), grid).values
    v = 2 * n_th + 1
    ref = 2 / (pi * v) * np.exp(-2 * (x[:, None] ** 2 + x[None, :] ** 2) / v)
    assert np.max(np.abs(w - ref)) < 1e-12


def test_position_route_matches_laguerre_oracle(rng):
    rho = DensityMatrix(random_density(rng, 25, rank=4))
    field = wigner_of_density(rho, SMALL)
    x = SMALL.coords
    ref = wigner_laguerre(rho, x[:, None], x[None, :])
    assert np.max(np.abs(field.values - ref)) < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 30), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_fock_states_bounded(n, x, y):
    assert abs(wigner_point(make_fock(n, n), x, y)) <= 2 / pi + 1e-12


def test_normalisation_and_bound(rng):
    rho = DensityMatrix(random_density(rng, 20))
    field = wigner_of_density(rho, PhaseSpaceGrid(8.0, 1 / 20))
    assert field.total == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(field.values)) <= 2 / pi + 1e-12


def test_gaussian_states_have_no_negativity():
    s = 2.0
    state = make_squeezed_vacuum(SqueezeSpec(s), suggest_n_max(s, 1e-30), tail_tol=1e-30)
    assert negativity(wigner_of_density(state, PhaseSpaceGrid(6.0, 1 / 20))) < 1e-12
    assert negativity(wigner_of_density(make_coherent(0.8j, 60), SMALL)) < 1e-15


def test_field_shape_checked():
    with pytest.raises(ConfigError):
        WignerField(SMALL, np.zeros((3, 3)))


def test_refine_maximum_finds_peak():
    res = refine_maximum(np.sin, np.linspace(0, 3, 40), tol=1e-7)
    assert res.t_star == pytest.approx(pi / 2, abs=2e-3)
    assert res.n_star == pytest.approx(1.0, abs=1e-6)
    assert res.evaluations > 40 and len(res.trace) > 1


def test_refine_maximum_flags_rising_window():
    with pytest.raises(WindowExhausted) as info:
        refine_maximum(lambda t: t * t, np.linspace(0, 1, 10))
    assert info.value.t_last == 1.0 and info.value.n_last == 1.0


def test_trajectory_checkpoints_consistent():
    p = SimulationParams(g=1.0, gamma=0.3, n_th=0.5, n_max=30)
    state = make_coherent(1.2, 30)
    grid = PhaseSpaceGrid(5.0, 1 / 10)
    batch = NegativityTrajectory(state, p, grid)(np.array([0.0, 0.4, 0.8, 1.2]))
    traj = NegativityTrajectory(state, p, grid)
    single = [traj(np.array([t]))[0] for t in (1.2, 0.4, 0.8)]
    assert np.allclose(single, batch[[3, 1, 2]], atol=1e-8)
    assert batch[0] < 1e-15 and batch[1] > 0


def test_max_negativity_coherent_kerr():
    # a coherent state under Kerr and weak damping develops a single negativity peak
    p = SimulationParams(g=1.0, gamma=0.5, n_th=0.0, n_max=30)
    res = max_negativity(make_coherent(1.5, 30), p, PhaseSpaceGrid(5.0, 1 / 10), t_max=3.0,
                         n_coarse=30)
    assert 0 < res.t_star < 3.0
    traj = NegativityTrajectory(make_coherent(1.5, 30), p, PhaseSpaceGrid(5.0, 1 / 10))
    dense = traj(np.linspace(0, 3.0, 121))
    assert res.n_star >= dense.max() - 1e-4


def test_convergence_report_rows():
    p = SimulationParams(g=1.0, gamma=0.5, n_th=0.0, n_max=30)
    rows = convergence_report(
        lambda n: make_coherent(1.5, n),
        p,
        [PhaseSpaceGrid(5.0, 1 / 5), PhaseSpaceGrid(4.0, 1 / 10)],
        [25],
        t_max=3.0,
        reference_grid=PhaseSpaceGrid(5.0, 1 / 10),
        reference_n_max=30,
        n_coarse=30,
    )
    assert [r["knob"] for r in rows] == ["reference", "delta_x", "x_max", "n_max"]
    assert all(r["error"] < 1e-3 for r in rows)
    with pytest.raises(ConfigError):
        convergence_report(lambda n: make_coherent(1.5, n), p, [PhaseSpaceGrid(4.0, 1 / 5)], [],
                           t_max=3.0, reference_grid=PhaseSpaceGrid(5.0, 1 / 10),
                           reference_n_max=30)


def test_serialisation_round_trip():
    field = wigner_of_density(make_fock(1, 1), PhaseSpaceGrid(1.0, 1 / 2))
    buf = io.BytesIO()
    write_field_binary(field, buf, {"t": 0.5})
    buf.seek(0)
    header, data = read_field_binary(buf)
    assert header["frame"] == "lab" and header["t"] == 0.5 and header["shape"] == [4, 4]
    assert np.array_equal(data, field.values)
    lines = field_to_csv(field).splitlines()
    assert lines[0] == "x,y,W" and len(lines) == 17
    x, y, w = map(float, lines[2].split(","))
    assert (x, y) == (-0.75, -0.25) and w == field.values[0, 1]
