import math

import numpy as np
import pytest

from kdvb_delay.grid import Grid
from kdvb_delay.history import HistorySpec
from kdvb_delay.oracle import (
    FD_CFL,
    FDConfig,
    OracleResult,
    delay_ode_reference,
    exact_linear_constant,
    fd_derivatives,
    fd_rk4_reference,
    fd_refinement,
    relative_l2,
)


def test_exact_solution_single_mode():
    # u = sin(x): u_xxx - u_xx = -cos x + sin x, the mode rotates and decays like e^{-2t}
    g = Grid(np.pi, 32)
    x = g.nodes
    u = exact_linear_constant(g.field(np.sin(x)), 1.0, 0.7)
    assert np.allclose(u.values, math.exp(-1.4) * np.sin(x + 0.7), atol=1e-14)
    with pytest.raises(ValueError):
        exact_linear_constant(g.field(np.sin(x)), 1.0, -1.0)


def test_exact_solution_semigroup():
    g = Grid(4.0, 64)
    u0 = g.field(np.exp(-g.nodes ** 2))
    a = exact_linear_constant(exact_linear_constant(u0, 0.3, 0.4), 0.3, 0.6)
    b = exact_linear_constant(u0, 0.3, 1.0)
    assert np.allclose(a.values, b.values, atol=1e-14)


def test_delay_ode_first_interval():
    ref = delay_ode_reference(1.0, 0.2, 1.0, lambda s: 1.0, 1.0, 1e-3)
    assert ref.method_tag == "delay_ode_steps"
    assert ref.at(1.0) == pytest.approx(1.2 * math.exp(-1.0) - 0.2, abs=1e-12)
    assert ref.at(0.5) == pytest.approx(1.2 * math.exp(-0.5) - 0.2, abs=1e-12)
    with pytest.raises(KeyError):
        ref.at(0.00049)


def test_delay_ode_second_interval():
    # on [1, 2]: u' = -u - 0.2 (1.2 e^{-(t-1)} - 0.2)
    ref = delay_ode_reference(1.0, 0.2, 1.0, lambda s: 1.0, 2.0, 1e-3)
    u1 = 1.2 * math.exp(-1.0) - 0.2
    s = 1.0
    exact = (u1 - 0.04) * math.exp(-s) + 0.04 - 0.24 * s * math.exp(-s)
    # half-step delayed values are interpolated linearly, an O(dt^2) error
    assert ref.at(2.0) == pytest.approx(exact, abs=2e-8)


def test_delay_ode_rejects_misaligned_tau():
    with pytest.raises(ValueError):
        delay_ode_reference(1.0, 0.2, 1.0005, lambda s: 1.0, 1.0, 1e-3)


def test_fd_derivatives_second_order():
    errs = []
    for N in (64, 128):
        g = Grid(np.pi, N)
        x = g.nodes
        ux, uxx, uxxx = fd_derivatives(np.sin(x), g.dx)
        errs.append(max(np.max(np.abs(ux - np.cos(x))), np.max(np.abs(uxx + np.sin(x))),
                        np.max(np.abs(uxxx + np.cos(x)))))
    assert 3.8 < errs[0] / errs[1] < 4.2


def test_fd_refinement_respects_cfl():
    dx = 48 / 512
    r = fd_refinement(1e-3, dx)
    assert 1e-3 / r <= FD_CFL * dx ** 3 < 1e-3 / (r - 1)
    assert fd_refinement(1e-6, 1.0) == 4


def test_fd_reference_rejects_cfl_violation():
    g = Grid(np.pi, 32)
    cfg = FDConfig(g, 1e-2, 1, 0.1, False, lambda x: 1.0, lambda x: 0.0, lambda x, s: np.sin(x))
    with pytest.raises(ValueError):
        fd_rk4_reference(cfg)


def test_fd_reference_tracks_exact_solution():
    g = Grid(np.pi, 64)
    dt = 0.5 * FD_CFL * g.dx ** 3
    n_tau = 10
    t_end = 2000 * dt
    cfg = FDConfig(g, dt, n_tau, t_end, False, lambda x: np.ones_like(x), lambda x: np.zeros_like(x),
                   HistorySpec(({"kind": "sine", "amplitude": 1.0, "wavenumber": 1.0},)))
    out = fd_rk4_reference(cfg, output_times=[0.0, t_end])
    assert out.method_tag == "fd_rk4" and len(out.times) == 2
    ref = exact_linear_constant(g.field(np.sin(g.nodes)), 1.0, out.times[-1])
    assert relative_l2(out.values[-1].values, ref.values) < 1e-3


def test_oracle_result_validation():
    with pytest.raises(ValueError):
        OracleResult([0.0, 0.0], [1, 2], "fd_rk4")
    with pytest.raises(ValueError):
        OracleResult([0.0, 1.0], [1, 2], "magic")


def test_relative_l2():
    assert relative_l2(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert relative_l2(np.array([3.0, 4.0]), np.zeros(2)) == 5.0
