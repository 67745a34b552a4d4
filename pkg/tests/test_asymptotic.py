from math import pi, sqrt

import numpy as np
import pytest

from squeezekerr.asymptotic import (
    AsymptoticParams,
    RescaledField,
    RescaledGrid,
    asymptotic_max_negativity,
    asymptotic_negativity,
    asymptotic_wigner,
    initial_slice_transform,
    numeric_slice_transform,
)
from squeezekerr.errors import ConfigError, QuadratureNotConverged, WindowExhausted
from squeezekerr.wigner import negativity_of_values

ODD = RescaledGrid(x_max=3.0, y_max=1.5, delta_x=1 / 10, delta_y=1 / 5)  # y rows include 0


def brute_force(params, x, y, n_k=20001, k_max=14.0):
    """Full complex trapezoid sum over k in [-k_max, k_max] at one point."""
    k = np.linspace(-k_max, k_max, n_k)
    a, b, tau = params.damping_ratio, params.dephasing_ratio, params.tau
    h = np.exp(-2 * y * y - k * k / 8) / pi
    u = np.exp(1j * tau * (-2 * k * y**3 + k**3 * y / 8))
    d = np.exp(-(a / 4 + b * y * y / 2) * k * k * tau)
    val = np.sum(h * u * d * np.exp(1j * k * x)) * (k[1] - k[0]) / sqrt(2 * pi)
    return val


def test_params_and_ratios():
    p = AsymptoticParams.from_ratios(2.0, 0.5, 0.25, s=4.0, g=3.0)
    assert p.damping_ratio == pytest.approx(0.5) and p.dephasing_ratio == pytest.approx(0.25)
    assert p.t == pytest.approx(2.0 / (3.0 * 256))
    with pytest.raises(ConfigError):
        AsymptoticParams(s=2.0, g=0.0)
    with pytest.raises(ConfigError):
        RescaledGrid(1.0, 1.0, 0.3)


def test_slice_transform_matches_quadrature():
    y = 0.4
    k = np.linspace(-6, 6, 13)
    num = numeric_slice_transform(lambda x: 2 / pi * np.exp(-2 * x * x - 2 * y * y), k)
    assert np.allclose(num.real, initial_slice_transform(y)(k), atol=1e-12)
    assert np.max(np.abs(num.imag)) < 1e-12


def test_initial_field_is_gaussian():
    field = asymptotic_wigner(AsymptoticParams(s=6.0), ODD)
    x, y = ODD.x, ODD.y
    ref = 2 / pi * np.exp(-2 * x[:, None] ** 2 - 2 * y[None, :] ** 2)
    assert np.max(np.abs(field.values - ref)) < 1e-8


def test_matches_brute_force_complex_sum():
    p = AsymptoticParams.from_ratios(0.7, 0.3, 0.2)
    grid = RescaledGrid(2.0, 1.0, 1 / 2)
    w = asymptotic_wigner(p, grid).values
    for i in (0, 1, 3):
        for j in (0, 2, 3):
            ref = brute_force(p, grid.x[i], grid.y[j])
            assert abs(ref.imag) < 1e-12
            assert w[i, j] == pytest.approx(ref.real, abs=1e-8)


def test_centre_row_is_heat_kernel():
    # on y~ = 0 the transport terms vanish and damping is pure diffusion of variance a tau / 2
    a, tau = 0.6, 1.5
    field = asymptotic_wigner(AsymptoticParams.from_ratios(tau, a, 0.9), ODD)
    j0 = int(np.argmin(np.abs(ODD.y)))
    assert ODD.y[j0] == 0.0
    v = 0.25 + a * tau / 2
    ref = 2 / pi * sqrt(0.25 / v) * np.exp(-ODD.x**2 / (2 * v))
    assert np.max(np.abs(field.values[:, j0] - ref)) < 1e-8


def test_point_symmetry_and_normalisation():
    p = AsymptoticParams.from_ratios(0.25, 0.2, 0.1)
    grid = RescaledGrid(10.0, 3.0, 1 / 20)
    w = asymptotic_wigner(p, grid).values
    assert np.allclose(w, w[::-1, ::-1], atol=1e-12)
    assert RescaledField(grid, w).total == pytest.approx(1.0, abs=1e-6)


def test_dephasing_attenuates_outer_rows_more():
    grid = RescaledGrid(12.0, 2.0, 1 / 10, 1 / 2)
    unit = asymptotic_wigner(AsymptoticParams.from_ratios(0.5), grid).values
    deph = asymptotic_wigner(AsymptoticParams.from_ratios(0.5, 0.0, 1.0), grid).values
    rows = grid.y > 0
    ratio = np.abs(deph).max(axis=0)[rows] / np.abs(unit).max(axis=0)[rows]
    assert np.all(np.diff(ratio) < 0)


def test_sheared_negativity_matches_fixed_grid():
    p = AsymptoticParams.from_ratios(0.25, 0.1, 0.0)
    grid = RescaledGrid(10.0, 3.0, 1 / 40)
    direct = negativity_of_values(asymptotic_wigner(p, grid).values, grid.cell_area)
    sheared = asymptotic_negativity(p, delta=1 / 40, y_max=3.0)
    assert direct > 1e-3
    assert sheared == pytest.approx(direct, abs=1e-6)


def test_negativity_depends_only_on_ratios():
    n1 = asymptotic_negativity(AsymptoticParams.from_ratios(1.3, 0.4, 0.5, s=6.0, g=1.0))
    n2 = asymptotic_negativity(AsymptoticParams.from_ratios(1.3, 0.4, 0.5, s=10.0, g=2.5))
    assert abs(n1 - n2) < 1e-12
    assert asymptotic_negativity(AsymptoticParams(s=6.0)) == 0.0


def test_quadrature_failure_reported():
    with pytest.raises(QuadratureNotConverged):
        asymptotic_wigner(AsymptoticParams.from_ratios(1.0), RescaledGrid(1.0, 1.0, 1 / 2), tol=0.0)


def test_max_negativity_with_damping():
    res = asymptotic_max_negativity(1.0)
    assert 0.5 < res.t_star < 1.5
    assert res.n_star == pytest.approx(0.00933, rel=0.01)


def test_unitary_window_exhausted():
    with pytest.raises(WindowExhausted) as info:
        asymptotic_max_negativity(0.0, 0.0, tau_max=1.0, n_coarse=10, delta=1 / 20)
    assert info.value.t_last == 1.0 and info.value.n_last > 0.1
