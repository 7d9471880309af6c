import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kdvb_delay.grid import (
    Field,
    Grid,
    GridMismatchError,
    dealias,
    derivative,
    inner_product,
    is_localized,
    lp_norm,
    mass,
)


@pytest.mark.parametrize("N", [6, 7, 12, 100])
def test_grid_rejects_bad_node_counts(N):
    with pytest.raises(ValueError):
        Grid(1.0, N)


@pytest.mark.parametrize("L", [0.0, -1.0, np.inf])
def test_grid_rejects_bad_half_width(L):
    with pytest.raises(ValueError):
        Grid(L, 16)


def test_nodes_and_wavenumbers(grid):
    x = grid.nodes
    assert x[0] == -np.pi
    assert np.isclose(x[1] - x[0], grid.dx)
    assert np.isclose(x[-1] + grid.dx, np.pi)
    assert grid.rwavenumbers[1] == pytest.approx(1.0)
    assert grid.k_max == pytest.approx(32.0)
    assert not grid.nodes.flags.writeable


def test_dealias_mask_keeps_lower_two_thirds(grid):
    keep = grid.dealias_mask
    assert keep[21] and not keep[22]  # 64/3 = 21.33


@pytest.mark.parametrize("order,expected", [(1, np.cos), (2, lambda x: -np.sin(x)), (3, lambda x: -np.cos(x))])
def test_spectral_derivative_of_sine(grid, order, expected):
    f = grid.sample(np.sin)
    d = derivative(f, order)
    # roundoff grows like k_max^order
    assert np.max(np.abs(d.values - expected(grid.nodes))) < 1e-10


def test_odd_derivative_drops_nyquist(grid):
    f = grid.field(np.cos(32 * grid.nodes))  # pure Nyquist mode
    assert np.max(np.abs(derivative(f, 1).values)) < 1e-12


def test_derivative_rejects_order():
    g = Grid(1.0, 16)
    with pytest.raises(ValueError):
        derivative(g.field(np.zeros(16)), 4)


def test_norms_of_constant(grid):
    f = grid.field(np.full(64, 3.0))
    assert lp_norm(f, 2) == pytest.approx(3.0 * np.sqrt(2 * np.pi))
    assert lp_norm(f, 1) == pytest.approx(3.0 * 2 * np.pi)
    assert lp_norm(f, np.inf) == 3.0
    assert mass(f) == pytest.approx(6 * np.pi)
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


def test_inner_product_orthogonality(grid):
    s, c = grid.sample(np.sin), grid.sample(np.cos)
    assert abs(inner_product(s, c)) < 1e-13
    assert inner_product(s, s) == pytest.approx(np.pi)


def test_field_arithmetic_and_mismatch(grid):
    a = grid.sample(np.sin)
    b = grid.sample(np.cos)
    assert np.allclose((a + b).values, np.sin(grid.nodes) + np.cos(grid.nodes))
    assert np.allclose((2 * a - b).values, 2 * np.sin(grid.nodes) - np.cos(grid.nodes))
    assert np.allclose(abs(-a).values, np.abs(np.sin(grid.nodes)))
    other = Grid(np.pi, 32).sample(np.sin)
    with pytest.raises(GridMismatchError):
        a + other


def test_field_rejects_nonfinite(grid):
    v = np.zeros(64)
    v[3] = np.nan
    with pytest.raises(ValueError):
        Field(grid, v)


def test_dealias_zeroes_upper_third():
    n = 12
    spec = np.ones(n, dtype=complex)
    out = dealias(spec)
    m = np.abs(np.fft.fftfreq(n, 1.0 / n))
    assert np.all(out[m > 4] == 0) and np.all(out[m <= 4] == 1)


def test_is_localized(wide_grid):
    x = wide_grid.nodes
    assert is_localized(np.exp(-x ** 2), wide_grid)
    assert not is_localized(np.exp(-((x - 11) ** 2)), wide_grid)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(-3, 3))
def test_derivative_is_linear(coeffs, a):
    g = Grid(np.pi, 32)
    x = g.nodes
    f = g.field(coeffs[0] * np.sin(x) + coeffs[1] * np.cos(2 * x) + coeffs[2])
    h = g.field(np.sin(3 * x))
    for order in (1, 2, 3):
        lhs = derivative(f * a + h, order).values
        rhs = a * derivative(f, order).values + derivative(h, order).values
        assert np.allclose(lhs, rhs, atol=1e-10)


@given(st.floats(0.1, 10), st.sampled_from([1.0, 1.5, 2.0, 4.0, np.inf]))
def test_lp_norm_is_homogeneous(c, p):
    g = Grid(2.0, 32)
    f = g.field(np.exp(-g.nodes ** 2) + 0.1)
    assert lp_norm(f * c, p) == pytest.approx(c * lp_norm(f, p), rel=1e-12)
