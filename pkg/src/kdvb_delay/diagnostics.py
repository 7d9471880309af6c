"""Lyapunov functionals, energy identity, B_T estimates and decay verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Field, derivative, is_localized, lp_norm
from .history import HistoryBuffer

CSV_COLUMNS = ("t", "E", "calE", "mass", "linf", "ux_l2", "identity_residual")

# pointwise bound slack: 1e-6 rounding plus 1e-3 for time quadrature of the memory term
DECAY_TOL = 1e-6 + 1e-3
ENERGY_FLOOR = 1e-14


@dataclass
class SimulationRecord:
    times: np.ndarray
    E_series: np.ndarray
    calE_series: np.ndarray
    mass_series: np.ndarray
    linf_series: np.ndarray
    ux_l2_series: np.ndarray
    identity_residual_series: np.ndarray
    damping_series: np.ndarray  # int lambda0 u^2 dx
    delay_series: np.ndarray  # int lambda u(t - tau) u(t) dx
    snapshots: list = field(default_factory=list)  # [(t, Field)]
    config_echo: dict = field(default_factory=dict)
    nonlinear: bool = False
    tau: float = 0.0
    lambda0_sup: float = 0.0
    lambda_sup: float = 0.0
    history_l2: float = 0.0  # ||u||_{L^2(-tau, 0; L^2)}
    final_state: Optional[Field] = None

    def __post_init__(self):
        n = len(self.times)
        for name in ("E_series", "calE_series", "mass_series", "linf_series",
                     "ux_l2_series", "identity_residual_series", "damping_series", "delay_series"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")

    @property
    def l2_series(self) -> np.ndarray:
        return np.sqrt(2.0 * self.E_series)

    def rows(self):
        cols = (self.times, self.E_series, self.calE_series, self.mass_series,
                self.linf_series, self.ux_l2_series, self.identity_residual_series)
        for values in zip(*cols):
            yield dict(zip(CSV_COLUMNS, (float(v) for v in values)))

    def truncated(self, t_max: float) -> "SimulationRecord":
        """Record restricted to times <= t_max (plus rounding)."""
        keep = self.times <= t_max * (1 + 1e-12) + 1e-12
        kw = {name: getattr(self, name)[keep] for name in (
            "times", "E_series", "calE_series", "mass_series", "linf_series",
            "ux_l2_series", "identity_residual_series", "damping_series", "delay_series")}
        return SimulationRecord(
            **kw,
            snapshots=[s for s in self.snapshots if s[0] <= t_max],
            config_echo=self.config_echo,
            nonlinear=self.nonlinear,
            tau=self.tau,
            lambda0_sup=self.lambda0_sup,
            lambda_sup=self.lambda_sup,
            history_l2=self.history_l2,
        )


def energy_E(u: Field) -> float:
    return 0.5 * lp_norm(u, 2) ** 2


def energy_calE(u: Field, buf: HistoryBuffer, abs_lambda: Field) -> float:
    return energy_E(u) + buf.memory_integral(abs_lambda)


def c_of_u0(buf: HistoryBuffer, abs_lambda: Field) -> float:
    """C(u0) taken as the Lyapunov functional at t = 0."""
    if buf.step_index != 0:
        raise ValueError("c_of_u0 needs the buffer at t = 0")
    return energy_calE(buf.newest(), buf, abs_lambda)


def history_l2_norm(buf: HistoryBuffer) -> float:
    """||u||_{L^2(t - tau, t; L^2)} by trapezoid over the slots."""
    s = buf.ordered()
    sq = np.sum(s * s, axis=1) * buf.grid.dx
    return math.sqrt(buf.dt * (sq.sum() - 0.5 * (sq[0] + sq[-1])))


def cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def identity_residual(record: SimulationRecord) -> np.ndarray:
    """Energy-identity residual at every recorded time, relative to E(0).

    1/2|u(t)|^2 + int_0^t |u_x|^2 + int_0^t int lambda0 u^2
    + int_0^t int lambda u(s - tau) u(s) - 1/2|u(0)|^2, time integrals by trapezoid.
    """
    if len(record.times) == 0:
        raise ValueError("empty record")
    t = record.times
    total = (
        record.E_series
        + cumulative_trapezoid(record.ux_l2_series ** 2, t)
        + cumulative_trapezoid(record.damping_series, t)
        + cumulative_trapezoid(record.delay_series, t)
        - record.E_series[0]
    )
    scale = record.E_series[0]
    return total / scale if scale > 0 else total


def bt_norm(record: SimulationRecord, T: Optional[float] = None) -> float:
    """sup_t ||u(t)||_2 + (int_0^T ||u_x||_2^2)^(1/2) over the recorded times."""
    if len(record.times) == 0:
        raise ValueError("empty record")
    r = record if T is None else record.truncated(T)
    sup = float(np.max(r.l2_series))
    return sup + math.sqrt(float(cumulative_trapezoid(r.ux_l2_series ** 2, r.times)[-1]))


def ct_constant(lambda0: Field, lam: Field, T: float) -> float:
    """sqrt(3/2) (1 + e^{2|lambda|T})^(1/2) e^{(|lambda| + |lambda0|) T}, sampled sup norms."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    return _ct(lp_norm(lambda0, np.inf), lp_norm(lam, np.inf), T)


def _ct(lam0_sup: float, lam_sup: float, T: float) -> float:
    return math.sqrt(1.5) * math.sqrt(1.0 + math.exp(2 * lam_sup * T)) * math.exp((lam_sup + lam0_sup) * T)


@dataclass(frozen=True)
class BTBoundVerdict:
    satisfied: bool
    lhs: float
    rhs: float
    C_T: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def verify_bt_bound(record: SimulationRecord, T: Optional[float] = None) -> BTBoundVerdict:
    """Check ||u||_{B_T} <= C_T {||u(0)|| + (|lambda| tau^1/2 + |lambda|^1/2) ||u||_{L^2(-tau,0;L^2)}}.

    Stated for the linear model with zero forcing only.
    """
    if record.nonlinear:
        raise ValueError("the B_T bound is stated for the linear model; got a nonlinear record")
    if len(record.times) == 0:
        raise ValueError("empty record")
    T = float(record.times[-1]) if T is None else T
    lhs = bt_norm(record, T)
    if T <= 0:
        return BTBoundVerdict(lhs <= 0.0, lhs, 0.0, math.sqrt(3.0))
    ct = _ct(record.lambda0_sup, record.lambda_sup, T)
    lam = record.lambda_sup
    rhs = ct * (
        float(record.l2_series[0])
        + (lam * math.sqrt(record.tau) + math.sqrt(lam)) * record.history_l2
    )
    return BTBoundVerdict(lhs <= rhs, lhs, rhs, ct)


@dataclass(frozen=True)
class InequalityVerdict:
    holds: bool
    lhs: float
    rhs: float


def check_interpolation_inequality(v: Field, rel_slack: float = 1e-8) -> InequalityVerdict:
    """||v||_inf^2 <= 2 ||v||_2 ||v_x||_2 for v localized in |x| <= L/2."""
    scale = max(1.0, lp_norm(v, np.inf))
    if not is_localized(v.values, v.grid, 1e-12 * scale):
        raise ValueError("field is not localized in |x| <= L/2; the inequality fails on the torus")
    lhs = lp_norm(v, np.inf) ** 2
    rhs = 2.0 * lp_norm(v, 2) * lp_norm(derivative(v, 1), 2)
    return InequalityVerdict(lhs <= rhs * (1 + rel_slack), lhs, rhs)


def check_holder_interpolation(u: Field, p: float, rel_slack: float = 1e-8) -> InequalityVerdict:
    """||u||_{2q}^2 <= ||u||_2^{2/q} ||u||_inf^{2/p}, q = p/(p-1)."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p!r}")
    q = p / (p - 1.0) if math.isfinite(p) else 1.0
    lhs = lp_norm(u, 2 * q) ** 2
    rhs = lp_norm(u, 2) ** (2 / q) * lp_norm(u, np.inf) ** (2 / p)
    return InequalityVerdict(lhs <= rhs * (1 + rel_slack), lhs, rhs)


class DecayFitError(ValueError):
    """The decay window is unusable (too short, or the energy hit the floor)."""


@dataclass(frozen=True)
class DecayReport:
    fitted_rate: float
    certified_rate: float
    window: tuple
    bound_satisfied: bool
    max_violation: float
    C_u0: float

    def to_dict(self) -> dict:
        return {
            "fitted_rate": self.fitted_rate,
            "certified_rate": self.certified_rate,
            "window": list(self.window),
            "bound_satisfied": self.bound_satisfied,
            "max_violation": self.max_violation,
            "C_u0": self.C_u0,
        }


def pointwise_bound_ratio(record: SimulationRecord, gamma: float) -> np.ndarray:
    """calE(t) / (calE(0) e^{-gamma t}) - 1 at each recorded time."""
    c0 = record.calE_series[0]
    return record.calE_series / (c0 * np.exp(-gamma * record.times)) - 1.0


def decay_report(record: SimulationRecord, certificate, window_fraction: float = 0.6,
                 tol: float = DECAY_TOL) -> DecayReport:
    """Fit the decay rate of calE over the trailing window and check the certified bound.

    ``certificate`` is a StabilityCertificate or a bare rate. The fit is
    informational; the pointwise bound check is the verdict.
    """
    gamma = getattr(certificate, "gamma", certificate)
    if gamma is None or not gamma > 0:
        raise ValueError("decay_report needs a positive certified rate")
    t, calE = record.times, record.calE_series
    if len(t) < 3 or t[-1] - t[0] < 5.0 / gamma:
        raise DecayFitError(f"record spans {t[-1] - t[0]:.4g} time units; need >= 5/gamma = {5 / gamma:.4g}")
    if calE[0] <= ENERGY_FLOOR:
        raise DecayFitError("floor reached: calE(0) is at the floating-point floor")
    t1 = t[-1] - window_fraction * (t[-1] - t[0])
    sel = (t >= t1) & (calE > ENERGY_FLOOR)
    if sel.sum() < 3:
        raise DecayFitError("floor reached: calE fell below 1e-14 before the fit window")
    slope = np.polyfit(t[sel], np.log(calE[sel]), 1)[0]
    ratio = pointwise_bound_ratio(record, gamma)
    max_violation = float(np.max(ratio))
    return DecayReport(
        fitted_rate=float(-slope),
        certified_rate=float(gamma),
        window=(float(t1), float(t[-1])),
        bound_satisfied=bool(max_violation <= tol),
        max_violation=max_violation,
        C_u0=float(calE[0]),
    )


def derivative_condition(record: SimulationRecord, gamma: float, eps_rel: float = 1e-3) -> np.ndarray:
    """Margin of (calE_{n+1} - calE_n)/dt <= -gamma calE_n + eps_rel calE(0); negative = violated."""
    t, c = record.times, record.calE_series
    dq = np.diff(c) / np.diff(t)
    return (-gamma * c[:-1] + eps_rel * c[0]) - dq


def monotone_condition(record: SimulationRecord) -> float:
    """Largest increase of calE between consecutive records, relative to calE(0)."""
    inc = np.diff(record.calE_series)
    return float(max(0.0, inc.max(initial=0.0)) / record.calE_series[0])
