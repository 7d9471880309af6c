"""Coefficient fields and the stability certificate.

Damping coefficients lambda0(x) (instantaneous) and lambda(x) (delayed) are
built from small declarative specs. ``certify`` checks the decay hypotheses
for a chosen (alpha0, alpha, p) and returns the guaranteed exponential rate
of the Lyapunov functional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Field, Grid, GridMismatchError, lp_norm

KINDS = ("constant", "gaussian_bump", "indicator", "piecewise_linear", "samples")
REGIMES = ("positive_damping", "indefinite_damping")


@dataclass(frozen=True)
class CoefficientSpec:
    """Declarative description of a coefficient function of x.

    Parameters by kind:

    - constant: ``value``
    - gaussian_bump: ``amplitude``, ``center``, ``width``  (a*exp(-(x-c)^2/w^2)),
      optional ``offset`` added everywhere
    - indicator: ``start``, ``end``, ``value`` (1 on the closed interval)
    - piecewise_linear: ``points`` [[x, v], ...], constant beyond the ends
    - samples: ``points`` [[x, v], ...], zero outside the table range
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}; expected one of {KINDS}")
        p = dict(self.params)
        for key, val in p.items():
            if key != "points" and not np.isfinite(float(val)):
                raise ValueError(f"{self.kind}.{key} must be finite")
        if self.kind == "constant":
            _require(p, ("value",), self.kind)
        elif self.kind == "gaussian_bump":
            _require(p, ("amplitude", "center", "width"), self.kind)
            if float(p["width"]) <= 0:
                raise ValueError("gaussian_bump.width must be positive")
        elif self.kind == "indicator":
            _require(p, ("start", "end"), self.kind)
            if float(p["end"]) < float(p["start"]):
                raise ValueError("indicator.end must be >= indicator.start")
        else:
            _require(p, ("points",), self.kind)
            pts = np.asarray(p["points"], dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise ValueError(f"{self.kind}.points must be a table of [x, value] rows (>= 2)")
            if not np.all(np.isfinite(pts)):
                raise ValueError(f"{self.kind}.points must be finite")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ValueError(f"{self.kind}.points must be sorted by strictly increasing x")

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise ValueError("coefficient spec needs a 'kind'")
        return cls(kind, d)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key, val in self.params.items():
            out[key] = [list(map(float, row)) for row in val] if key == "points" else float(val)
        return out

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, float(p["value"]))
        if self.kind == "gaussian_bump":
            a, c, w = float(p["amplitude"]), float(p["center"]), float(p["width"])
            return float(p.get("offset", 0.0)) + a * np.exp(-(((x - c) / w) ** 2))
        if self.kind == "indicator":
            lo, hi = float(p["start"]), float(p["end"])
            return np.where((x >= lo) & (x <= hi), float(p.get("value", 1.0)), 0.0)
        pts = np.asarray(p["points"], dtype=float)
        if self.kind == "piecewise_linear":
            return np.interp(x, pts[:, 0], pts[:, 1])
        return np.interp(x, pts[:, 0], pts[:, 1], left=0.0, right=0.0)


def _require(params, keys, kind):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ValueError(f"{kind} spec is missing {', '.join(missing)}")


def sample_coefficient(spec: CoefficientSpec, grid: Grid) -> Field:
    return Field(grid, spec.evaluate(grid.nodes))


def compute_cp(p: float) -> float:
    """(1 - 1/(2p)) * (2/p)^(1/(2p-1)) for 1 <= p < inf."""
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"p must lie in [1, inf), got {p!r}")
    return (1.0 - 1.0 / (2.0 * p)) * (2.0 / p) ** (1.0 / (2.0 * p - 1.0))


def delay_factor(tau: float) -> float:
    return 0.5 * (math.exp(tau) + 1.0)


def minimal_beta(lam: Field, tau: float, alpha: float) -> Field:
    """Pointwise-smallest beta with (e^tau + 1)/2 * |lambda| <= alpha + beta."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha!r}")
    return Field(lam.grid, np.maximum(0.0, delay_factor(tau) * np.abs(lam.values) - alpha))


def minimal_beta0(lambda0: Field, alpha0: float) -> Field:
    """Pointwise-smallest beta0 with lambda0 >= alpha0 - beta0."""
    return Field(lambda0.grid, np.maximum(0.0, alpha0 - lambda0.values))


def norm_bound(p: float, margin: float) -> float:
    """(margin / c_p)^(1 - 1/(2p)); zero when the margin is not positive."""
    if margin <= 0:
        return 0.0
    return (margin / compute_cp(p)) ** (1.0 - 1.0 / (2.0 * p))


def certified_rate(alpha0: float, alpha: float, p: float, beta_norm: float) -> float:
    """Certified rate min{2(alpha0 - alpha - c_p*||beta||^(2p/(2p-1))), 1}."""
    inner = alpha0 - alpha - compute_cp(p) * beta_norm ** (2.0 * p / (2.0 * p - 1.0))
    return min(2.0 * inner, 1.0)


@dataclass(frozen=True)
class HypothesisInput:
    tau: float
    p: float
    alpha0: float
    alpha: float
    regime: str = "positive_damping"

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be a positive finite number, got {self.tau!r}")
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise ValueError(f"p must lie in [1, inf), got {self.p!r}")
        if not self.alpha0 > 0:
            raise ValueError(f"alpha0 must be positive, got {self.alpha0!r}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha!r}")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")


@dataclass
class StabilityCertificate:
    passed: bool
    c_p: float
    beta_norm: float
    bound: float
    gamma: Optional[float]
    beta_field: Field
    beta0_field: Optional[Field]
    failure_reasons: list
    hypothesis: HypothesisInput
    lambda0_min: float
    lambda_sup: float
    beta0_norm: Optional[float] = None
    beta0_bound: Optional[float] = None

    def to_dict(self, include_fields: bool = True) -> dict:
        h = self.hypothesis
        out = {
            "passed": self.passed,
            "regime": h.regime,
            "tau": h.tau,
            "p": h.p,
            "alpha0": h.alpha0,
            "alpha": h.alpha,
            "c_p": self.c_p,
            "delay_factor": delay_factor(h.tau),
            "lambda0_min_sampled": self.lambda0_min,
            "lambda_sup_sampled": self.lambda_sup,
            "beta_norm": self.beta_norm,
            "bound": self.bound,
            "beta0_norm": self.beta0_norm,
            "beta0_bound": self.beta0_bound,
            "gamma": self.gamma,
            "failure_reasons": list(self.failure_reasons),
        }
        if include_fields:
            out["beta"] = self.beta_field.values.tolist()
            out["beta0"] = None if self.beta0_field is None else self.beta0_field.values.tolist()
        return out


def certify(lambda0: Field, lam: Field, hyp: HypothesisInput) -> StabilityCertificate:
    """Check the decay hypotheses on sampled coefficients.

    Essential infima/suprema are replaced by min/max over the grid nodes.
    Failed checks are named in ``failure_reasons``:

    - ``alpha_below_alpha0``: 0 <= alpha < alpha0
    - ``damping_floor``: lambda0 >= alpha0 everywhere (positive regime)
    - ``beta0_norm_bound``: ||beta0||_p < (alpha0/c_p)^(1-1/(2p)) (indefinite regime)
    - ``beta_norm_bound``: ||beta||_p (resp. ||beta0 + beta||_p) < ((alpha0-alpha)/c_p)^(1-1/(2p))
    """
    if lambda0.grid != lam.grid:
        raise GridMismatchError("lambda0 and lambda live on different grids")
    p, a0, a = hyp.p, hyp.alpha0, hyp.alpha
    cp = compute_cp(p)
    reasons = []
    if not a < a0:
        reasons.append(f"alpha_below_alpha0: alpha = {a!r} is not < alpha0 = {a0!r}")
    beta = minimal_beta(lam, hyp.tau, a)
    bound = norm_bound(p, a0 - a)
    lam0_min = float(lambda0.values.min())
    beta0 = beta0_norm = beta0_bound = None

    if hyp.regime == "positive_damping":
        if lam0_min < a0:
            reasons.append(
                f"damping_floor: sampled min lambda0 = {lam0_min!r} < alpha0 = {a0!r}"
            )
        beta_norm = lp_norm(beta, p)
    else:
        beta0 = minimal_beta0(lambda0, a0)
        beta0_norm = lp_norm(beta0, p)
        beta0_bound = norm_bound(p, a0)
        if not beta0_norm < beta0_bound:
            reasons.append(
                f"beta0_norm_bound: ||beta0||_{p:g} = {beta0_norm!r} >= {beta0_bound!r}"
            )
        beta_norm = lp_norm(beta0 + beta, p)

    if not beta_norm < bound:
        reasons.append(f"beta_norm_bound: ||beta||_{p:g} = {beta_norm!r} >= {bound!r}")

    gamma = None
    if not reasons:
        gamma = certified_rate(a0, a, p, beta_norm)
        if not gamma > 0:
            reasons.append(f"positive_rate: gamma = {gamma!r} is not positive")
            gamma = None

    return StabilityCertificate(
        passed=not reasons,
        c_p=cp,
        beta_norm=beta_norm,
        bound=bound,
        gamma=gamma,
        beta_field=beta,
        beta0_field=beta0,
        failure_reasons=reasons,
        hypothesis=hyp,
        lambda0_min=lam0_min,
        lambda_sup=float(np.max(np.abs(lam.values))),
        beta0_norm=beta0_norm,
        beta0_bound=beta0_bound,
    )
