import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kdvb_delay.grid import Field, Grid, GridMismatchError
from kdvb_delay.history import HistoryBuffer, HistorySpec, init_history, memory_integral


def _ramp(x, s):
    # slot at time s holds the constant s
    return np.full_like(x, s)


def test_init_history_samples_slot_times():
    g = Grid(1.0, 8)
    buf = init_history(_ramp, g, 4, 0.25)
    assert np.allclose(buf.slot_times(), [-1.0, -0.75, -0.5, -0.25, 0.0])
    assert np.allclose(buf.ordered()[:, 0], buf.slot_times())
    assert buf.delayed_state().values[0] == -1.0
    assert buf.newest().values[0] == 0.0
    assert buf.tau == 1.0


def test_push_advances_window():
    g = Grid(1.0, 8)
    buf = init_history(_ramp, g, 3, 0.5)
    for n in range(1, 6):
        buf.push(np.full(8, n * 0.5))
        assert buf.current_time == pytest.approx(n * 0.5)
        assert np.allclose(buf.ordered()[:, 0], buf.slot_times())
        assert buf.delayed_state(1).values[0] == pytest.approx(buf.slot_times()[1])


def test_push_rejects_foreign_grid():
    g = Grid(1.0, 8)
    buf = init_history(_ramp, g, 2, 0.1)
    with pytest.raises(GridMismatchError):
        buf.push(Field(Grid(2.0, 8), np.zeros(8)))


def test_constructor_validation():
    g = Grid(1.0, 8)
    with pytest.raises(ValueError):
        HistoryBuffer(g, 0, 0.1, np.zeros((1, 8)))
    with pytest.raises(ValueError):
        HistoryBuffer(g, 2, 0.1, np.zeros((2, 8)))
    with pytest.raises(ValueError):
        init_history(lambda x, s: np.full_like(x, np.nan), g, 2, 0.1)


def test_memory_integral_constant_history():
    # w(s) = int |lambda| u^2 = 2L for u = lambda = 1; integral -> (1 - e^-tau) L
    g = Grid(1.0, 16)
    n_tau, dt = 400, 0.0025
    buf = init_history(lambda x, s: np.ones_like(x), g, n_tau, dt)
    lam = g.field(np.ones(16))
    exact = 0.5 * 2.0 * (1 - math.exp(-1.0))
    assert memory_integral(buf, lam) == pytest.approx(exact, rel=1e-5)


def test_memory_integral_cache_tracks_pushes():
    g = Grid(1.0, 8)
    rng = np.random.default_rng(3)
    buf = init_history(lambda x, s: np.sin(x + s), g, 5, 0.1)
    lam = g.field(np.abs(rng.normal(size=8)))
    buf.memory_integral(lam)
    for _ in range(7):
        buf.push(rng.normal(size=8))
    fresh = buf.copy()
    assert buf.memory_integral(lam) == pytest.approx(fresh.memory_integral(lam), rel=1e-14)
    with pytest.raises(ValueError):
        fresh.memory_integral(g.field(-np.ones(8)))


def test_checkpoint_roundtrip(tmp_path):
    g = Grid(3.0, 16)
    buf = init_history(lambda x, s: np.cos(x) * (1 + s), g, 4, 0.05)
    buf.push(np.arange(16.0))
    path = tmp_path / "hist.bin"
    buf.save(path)
    back = HistoryBuffer.load(path)
    assert back.grid == g and back.n_tau == 4 and back.step_index == 1
    assert np.array_equal(back.ordered(), buf.ordered())
    path.write_bytes(b"nonsense" + path.read_bytes()[8:])
    with pytest.raises(ValueError):
        HistoryBuffer.load(path)


def test_history_spec_terms():
    spec = HistorySpec.from_dict({"profile": [
        {"kind": "sine", "amplitude": 2.0, "wavenumber": 1.0},
        {"kind": "constant", "value": 1.0}], "time_rate": 0.5})
    x = np.array([0.0, np.pi / 2])
    assert np.allclose(spec.evaluate(x, 0.0), [1.0, 3.0])
    assert np.allclose(spec.evaluate(x, -2.0), np.array([1.0, 3.0]) * math.exp(-1.0))
    assert not spec.is_constant_in_x()
    inline = HistorySpec.from_dict({"kind": "constant", "value": 1.0})
    assert inline.is_constant_in_x()
    assert HistorySpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("bad", [{"profile": []}, {"kind": "sine", "amplitude": 1.0},
                                 {"kind": "constant"}, {"kind": "constant", "value": 1, "time_rate": np.inf}])
def test_history_spec_rejects(bad):
    with pytest.raises(ValueError):
        HistorySpec.from_dict(bad)


@given(st.integers(1, 12), st.integers(0, 40))
def test_ring_order_property(n_tau, pushes):
    g = Grid(1.0, 8)
    buf = init_history(_ramp, g, n_tau, 1.0)
    for n in range(1, pushes + 1):
        buf.push(np.full(8, float(n)))
    col = buf.ordered()[:, 0]
    assert np.array_equal(col, buf.slot_times())
    assert buf.delayed_state().values[0] == pushes - n_tau


def test_memory_quadrature_is_second_order():
    # u(x, s) = e^{s} on a unit lambda: w(s) = 2L e^{2s}, integrand e^{s} * 2L e^{2s} with tau = 1
    g = Grid(1.0, 8)
    lam = g.field(np.ones(8))
    exact = 0.5 * 2.0 * (1 - math.exp(-3.0)) / 3.0
    errs = []
    for n_tau in (10, 20, 40):
        buf = init_history(lambda x, s: np.full_like(x, math.exp(s)), g, n_tau, 1.0 / n_tau)
        errs.append(abs(buf.memory_integral(lam) - exact))
    assert 3.8 < errs[0] / errs[1] < 4.2
    assert 3.8 < errs[1] / errs[2] < 4.2
