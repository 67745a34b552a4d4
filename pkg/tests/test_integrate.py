import numpy as np
import pytest

from squeezekerr.errors import ToleranceNotMet
from squeezekerr.integrate import IntegrationStats, dopri5


def test_exponential_decay_hits_requested_times():
    t = np.linspace(0, 3, 7)
    out = dopri5(lambda t, y: -2.0 * y, np.array([1.0 + 0j]), t, rtol=1e-10, atol=1e-12)
    assert len(out) == 7
    assert np.allclose([o[0] for o in out], np.exp(-2 * t), rtol=1e-8, atol=0)


def test_matrix_rotation_is_accurate():
    gen = np.array([[0, -1], [1, 0]], dtype=complex)
    y0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    out = dopri5(lambda t, y: gen @ y, y0, [0.0, np.pi / 2], rtol=1e-10, atol=1e-12)
    assert np.allclose(out[-1], [[0, 0], [1, 0]], atol=1e-8)


def test_projection_applied_and_stats_recorded():
    stats = IntegrationStats()
    sym = lambda y: 0.5 * (y + y.conj().T)  # noqa: E731
    y0 = np.array([[1.0, 0.2], [0.2, 0.0]], dtype=complex)
    out = dopri5(lambda t, y: -y, y0, [0.0, 1.0], project=sym, stats=stats)
    assert np.allclose(out[-1], out[-1].conj().T)
    assert stats.n_accepted > 0 and stats.n_rhs >= 6 * stats.n_accepted
    assert len(stats.step_sizes) == stats.n_accepted


def test_step_collapse_raises():
    # finite-time blow-up of y' = y^2 at t = 1
    with np.errstate(all="ignore"), pytest.raises(ToleranceNotMet):
        dopri5(lambda t, y: y * y, np.array([1.0]), [0.0, 2.0])


def test_rejects_bad_times():
    with pytest.raises(ValueError):
        dopri5(lambda t, y: y, np.array([1.0]), [0.0, 0.0])
