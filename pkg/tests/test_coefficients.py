import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kdvb_delay.coefficients import (
    CoefficientSpec,
    HypothesisInput,
    certified_rate,
    certify,
    compute_cp,
    delay_factor,
    minimal_beta,
    minimal_beta0,
    norm_bound,
    sample_coefficient,
)
from kdvb_delay.config import load_preset
from kdvb_delay.grid import Grid, lp_norm


def _coeffs(name):
    cfg = load_preset(name)
    g = cfg.grid
    return sample_coefficient(cfg.lambda0, g), sample_coefficient(cfg.lam, g), cfg.certificate


def test_kinds_evaluate():
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    assert np.all(CoefficientSpec("constant", {"value": 0.5}).evaluate(x) == 0.5)
    bump = CoefficientSpec("gaussian_bump", {"amplitude": 2.0, "center": 1.0, "width": 0.5, "offset": 1.0})
    assert bump.evaluate(x)[3] == 3.0
    assert bump.evaluate(x)[1] == pytest.approx(1.0 + 2.0 * math.exp(-16.0))
    ind = CoefficientSpec("indicator", {"start": -1.0, "end": 1.0, "value": 4.0})
    assert list(ind.evaluate(x)) == [0.0, 4.0, 4.0, 4.0, 0.0]
    pl = CoefficientSpec("piecewise_linear", {"points": [[-1.0, 0.0], [1.0, 2.0]]})
    assert list(pl.evaluate(x)) == [0.0, 0.0, 1.0, 2.0, 2.0]
    sm = CoefficientSpec("samples", {"points": [[-1.0, 1.0], [1.0, 1.0]]})
    assert list(sm.evaluate(x)) == [0.0, 1.0, 1.0, 1.0, 0.0]


@pytest.mark.parametrize("kind,params", [
    ("wave", {}),
    ("constant", {}),
    ("gaussian_bump", {"amplitude": 1.0, "center": 0.0, "width": 0.0}),
    ("indicator", {"start": 1.0, "end": 0.0}),
    ("piecewise_linear", {"points": [[1.0, 0.0], [0.0, 1.0]]}),
    ("samples", {"points": [[0.0, 1.0]]}),
    ("constant", {"value": float("nan")}),
])
def test_invalid_specs_rejected(kind, params):
    with pytest.raises(ValueError):
        CoefficientSpec(kind, params)


def test_spec_dict_roundtrip():
    d = {"kind": "piecewise_linear", "points": [[-1.0, 0.0], [1.0, 2.0]]}
    assert CoefficientSpec.from_dict(d).to_dict() == d


def test_cp_values():
    # c_1 = 1/2 * 2 = 1, c_2 = 3/4 * 1 = 3/4
    assert compute_cp(1.0) == pytest.approx(1.0)
    assert compute_cp(2.0) == pytest.approx(0.75)
    assert compute_cp(4.0) == pytest.approx(0.875 * 0.5 ** (1 / 7))
    with pytest.raises(ValueError):
        compute_cp(0.5)


def test_minimal_beta_and_beta0():
    g = Grid(4.0, 32)
    lam = g.field(np.linspace(-1, 1, 32))
    beta = minimal_beta(lam, 0.5, 0.2)
    expected = np.maximum(0.0, delay_factor(0.5) * np.abs(lam.values) - 0.2)
    assert np.allclose(beta.values, expected)
    with pytest.raises(ValueError):
        minimal_beta(lam, 0.0, 0.2)
    lam0 = g.field(np.linspace(-1, 2, 32))
    assert np.allclose(minimal_beta0(lam0, 1.0).values, np.maximum(0.0, 1.0 - lam0.values))


def test_norm_bound_and_rate():
    assert norm_bound(2.0, 0.75) == pytest.approx(1.0)
    assert norm_bound(2.0, -1.0) == 0.0
    assert certified_rate(1.0, 0.0, 2.0, 0.0) == 1.0  # clamp
    assert certified_rate(1.0, 0.5, 2.0, 0.0) == pytest.approx(1.0)
    assert certified_rate(1.0, 0.6, 2.0, 0.0) == pytest.approx(0.8)


def test_hypothesis_input_validation():
    with pytest.raises(ValueError):
        HypothesisInput(0.0, 2.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        HypothesisInput(1.0, 0.5, 1.0, 0.1)
    with pytest.raises(ValueError):
        HypothesisInput(1.0, 2.0, 1.0, 0.1, regime="other")


def test_preset_a_certificate_matches_independent_quadrature():
    lam0, lam, hyp = _coeffs("preset-A")
    cert = certify(lam0, lam, hyp)
    assert cert.passed and not cert.failure_reasons
    # beta = max(0, 1.2 (e^0.25 + 1)/2 exp(-x^2/0.25) - 0.15), integrated on a fine mesh
    x = np.linspace(-24, 24, 400001)
    beta = np.maximum(0.0, 1.2 * 0.5 * (math.exp(0.25) + 1) * np.exp(-x ** 2 / 0.25) - 0.15)
    norm = math.sqrt(np.sum(beta ** 2) * (x[1] - x[0]))
    assert cert.beta_norm == pytest.approx(norm, rel=1e-4)
    gamma = 2 * (1.0 - 0.15 - 0.75 * norm ** (4 / 3))
    # the grid (dx = 0.19) does not resolve the kink of beta, so gamma agrees to ~1e-4 absolute
    assert cert.gamma == pytest.approx(gamma, abs=5e-4)
    assert cert.gamma == pytest.approx(0.34814, abs=2e-5)


def test_preset_c_indefinite_certificate():
    lam0, lam, hyp = _coeffs("preset-C")
    assert lam0.values.min() < 0  # damping really is indefinite
    cert = certify(lam0, lam, hyp)
    assert cert.passed
    assert cert.beta0_norm < cert.beta0_bound
    assert cert.gamma == pytest.approx(0.34959, abs=2e-5)


def test_preset_n_rejected_with_named_reason():
    lam0, lam, hyp = _coeffs("preset-N")
    cert = certify(lam0, lam, hyp)
    assert not cert.passed and cert.gamma is None
    assert [r.split(":")[0] for r in cert.failure_reasons] == ["beta_norm_bound"]


def test_damping_floor_and_alpha_order():
    g = Grid(4.0, 32)
    lam0 = g.field(np.full(32, 0.5))
    lam = g.field(np.zeros(32))
    cert = certify(lam0, lam, HypothesisInput(1.0, 2.0, 1.0, 1.5))
    names = {r.split(":")[0] for r in cert.failure_reasons}
    assert names == {"alpha_below_alpha0", "damping_floor", "beta_norm_bound"}


def test_certificate_serializes():
    lam0, lam, hyp = _coeffs("preset-A")
    d = certify(lam0, lam, hyp).to_dict()
    assert d["passed"] and len(d["beta"]) == 256
    assert "beta" not in certify(lam0, lam, hyp).to_dict(include_fields=False)


@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_rate_decreases_with_beta_norm(b1, b2):
    lo, hi = sorted((b1, b2))
    assert certified_rate(1.0, 0.1, 2.0, hi) <= certified_rate(1.0, 0.1, 2.0, lo) <= 1.0


@given(st.floats(0.05, 3.0), st.floats(0.0, 2.0))
def test_zero_delay_feedback_is_certified(tau, a0_extra):
    g = Grid(4.0, 32)
    a0 = 0.5 + a0_extra
    cert = certify(g.field(np.full(32, a0)), g.field(np.zeros(32)), HypothesisInput(tau, 2.0, a0, 0.25 * a0))
    assert cert.passed
    assert cert.gamma == pytest.approx(min(1.5 * a0, 1.0))
    assert lp_norm(cert.beta_field, 2) == 0.0
