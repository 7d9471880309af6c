"""Pseudo-spectral ETD-RK2 integrator for the delayed KdV-Burgers models.

    u_t + u_xxx - u_xx + lambda0(x) u + lambda(x) u(t - tau) [+ u u_x] = 0

The diagonal operator -d^3 + d^2 - c (c a constant damping shift) is
propagated exactly in Fourier space. The remainder
-(lambda0 - c) u - lambda u(t - tau) - u u_x is treated explicitly with
second-order exponential time differencing.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .diagnostics import SimulationRecord, history_l2_norm
from .grid import Field, Grid, GridMismatchError
from .history import HistoryBuffer, init_history

STABILITY_SAFETY = 0.9


class BlowUpError(RuntimeError):
    """Non-finite values appeared in the solution."""


class StabilityBoundError(RuntimeError):
    """The step size exceeds the explicit-term stability bound."""


@dataclass(frozen=True, eq=False)
class SolverConfig:
    grid: Grid
    dt: float
    n_tau: int
    t_end: float
    nonlinear: bool
    lambda0: Field
    lam: Field
    initial_history: object  # HistorySpec or callable (x, s) -> values
    record_stride: int = 1
    snapshot_stride: int = 0  # 0: first and last state only
    damping_shift: Optional[float] = None  # None: midrange of lambda0
    check_stability: bool = True
    echo: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.n_tau) != self.n_tau or self.n_tau < 1:
            raise ValueError(f"n_tau must be a positive integer, got {self.n_tau!r}")
        if not self.t_end >= self.dt * (1 - 1e-12):
            raise ValueError(f"t_end must be >= dt, got t_end={self.t_end!r}, dt={self.dt!r}")
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"t_end={self.t_end!r} is not a whole number of steps dt={self.dt!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        for name in ("lambda0", "lam"):
            f = getattr(self, name)
            if f.grid != self.grid:
                raise GridMismatchError(f"{name} lives on a different grid")

    @property
    def tau(self) -> float:
        return self.n_tau * self.dt

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def shift(self) -> float:
        if self.damping_shift is not None:
            return float(self.damping_shift)
        v = self.lambda0.values
        return 0.5 * (float(v.max()) + float(v.min()))


@dataclass
class SolverState:
    u: np.ndarray
    u_hat: np.ndarray
    t: float
    step_index: int

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray, step_index: int, dt: float) -> "SolverState":
        u = np.array(values, dtype=float)
        return cls(u, grid.forward(u), step_index * dt, step_index)

    def field(self, grid: Grid) -> Field:
        return Field(grid, self.u)


def linear_symbol(grid: Grid, shift: float = 0.0) -> np.ndarray:
    """sigma(k) = i k^3 - k^2 - shift on the real-input spectrum.

    The odd (dispersive) part is dropped at the Nyquist mode so the
    propagator keeps fields real.
    """
    k = grid.rwavenumbers
    sigma = 1j * k ** 3 - k ** 2 - shift
    sigma[-1] = -k[-1] ** 2 - shift
    return sigma


def _phi_series(z: np.ndarray, order: int, terms: int = 20) -> np.ndarray:
    # phi_order(z) = sum_j z^j / (j + order)!
    out = np.full_like(z, 1.0 / math.factorial(order + terms - 1))
    for j in range(terms - 2, -1, -1):
        out = out * z + 1.0 / math.factorial(order + j)
    return out


def phi_functions(z: np.ndarray):
    """phi1 = (e^z - 1)/z and phi2 = (e^z - 1 - z)/z^2, series near zero."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1.0
    zs = np.where(small, 1.0, z)
    ez = np.exp(zs)
    phi1 = np.where(small, _phi_series(z, 1), (ez - 1.0) / zs)
    phi2 = np.where(small, _phi_series(z, 2), (ez - 1.0 - zs) / zs ** 2)
    return phi1, phi2


class Stepper:
    """Precomputed ETD-RK2 coefficients for one configuration."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        g = cfg.grid
        self.grid = g
        self.dt = cfg.dt
        self.nonlinear = bool(cfg.nonlinear)
        c = cfg.shift
        sigma = linear_symbol(g, c)
        z = sigma * cfg.dt
        phi1, phi2 = phi_functions(z)
        self.E = np.exp(z)
        self.P1 = cfg.dt * phi1
        self.P2 = cfg.dt * phi2
        self.explicit_damping = cfg.lambda0.values - c
        self.lam = cfg.lam.values
        self.ik = 1j * g.rwavenumbers
        self.mask = g.dealias_mask
        self.coef_sup = float(np.max(np.abs(cfg.lambda0.values)) + np.max(np.abs(cfg.lam.values)))

    def explicit_hat(self, u: np.ndarray, u_hat: np.ndarray, u_delayed: np.ndarray) -> np.ndarray:
        g = self.grid
        out = g.forward(-self.explicit_damping * u - self.lam * u_delayed)
        if self.nonlinear:
            v_hat = u_hat * self.mask
            v = g.inverse(v_hat)
            v_x = g.inverse(self.ik * v_hat)
            out -= g.forward(v * v_x) * self.mask
        return out

    def check_stability(self, u: np.ndarray, step_index: int) -> None:
        rate = self.coef_sup
        if self.nonlinear:
            rate += float(np.max(np.abs(u))) * self.grid.k_max
        if rate > 0 and self.dt > STABILITY_SAFETY / rate:
            raise StabilityBoundError(
                f"step {step_index}: dt={self.dt:g} exceeds stability bound "
                f"{STABILITY_SAFETY / rate:.4g}"
            )

    def step(self, state: SolverState, buf: HistoryBuffer) -> SolverState:
        if self.cfg.check_stability:
            self.check_stability(state.u, state.step_index)
        # delayed values at the two stage times t and t + dt; both are stored slots
        d0 = buf.slot_values(0)
        d1 = buf.slot_values(1)
        g0 = self.explicit_hat(state.u, state.u_hat, d0)
        a_hat = self.E * state.u_hat + self.P1 * g0
        a = self.grid.inverse(a_hat)
        g1 = self.explicit_hat(a, a_hat, d1)
        u_hat = a_hat + self.P2 * (g1 - g0)
        u = self.grid.inverse(u_hat)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite solution at step {state.step_index + 1}")
        buf.push(u)
        n = state.step_index + 1
        return SolverState(u, u_hat, n * self.dt, n)


_steppers: "weakref.WeakKeyDictionary[SolverConfig, Stepper]" = weakref.WeakKeyDictionary()


def stepper_for(cfg: SolverConfig) -> Stepper:
    st = _steppers.get(cfg)
    if st is None:
        st = _steppers[cfg] = Stepper(cfg)
    return st


def explicit_term(u: Field, u_delayed: Field, lambda0: Field, lam: Field, nonlinear: bool) -> Field:
    """G(u) = -lambda0 u - lambda u_delayed - [nonlinear] u u_x (product dealiased)."""
    for f in (u_delayed, lambda0, lam):
        u._check(f)
    g = u.grid
    out = -lambda0.values * u.values - lam.values * u_delayed.values
    if nonlinear:
        v_hat = g.forward(u.values) * g.dealias_mask
        prod = g.inverse(v_hat) * g.inverse(1j * g.rwavenumbers * v_hat)
        out = out - g.inverse(g.forward(prod) * g.dealias_mask)
    return Field(g, out)


def etd_rk2_step(state: SolverState, buf: HistoryBuffer, cfg: SolverConfig) -> SolverState:
    """Advance one step and push the new state onto ``buf``."""
    return stepper_for(cfg).step(state, buf)


def initial_buffer(cfg: SolverConfig) -> HistoryBuffer:
    return init_history(cfg.initial_history, cfg.grid, cfg.n_tau, cfg.dt)


class _Recorder:
    def __init__(self, cfg: SolverConfig, buf: HistoryBuffer, sink):
        g = cfg.grid
        self.grid = g
        self.dx = g.dx
        self.lam0 = cfg.lambda0.values
        self.lam = cfg.lam.values
        self.abs_lam = abs(cfg.lam)
        self.ik = 1j * g.rwavenumbers
        self.sink = sink
        self.rows = {k: [] for k in ("t", "E", "calE", "mass", "linf", "ux", "damp", "delay", "res")}
        self.cum = 0.0
        self.prev = None

    def __call__(self, state: SolverState, buf: HistoryBuffer) -> None:
        u, dx = state.u, self.dx
        ux_hat = self.ik * state.u_hat
        ux_hat[-1] = 0.0
        ux = self.grid.inverse(ux_hat)
        E = 0.5 * np.dot(u, u) * dx
        ux2 = np.dot(ux, ux) * dx
        damp = np.dot(self.lam0 * u, u) * dx
        delay = np.dot(self.lam * buf.slot_values(0), u) * dx
        calE = E + buf.memory_integral(self.abs_lam)
        t = state.t
        integrand = ux2 + damp + delay
        if self.prev is None:
            self.E0 = E
        else:
            tp, ip = self.prev
            self.cum += 0.5 * (t - tp) * (ip + integrand)
        self.prev = (t, integrand)
        total = E + self.cum - self.E0
        res = total / self.E0 if self.E0 > 0 else total
        r = self.rows
        for key, val in (("t", t), ("E", E), ("calE", calE), ("mass", np.sum(u) * dx),
                         ("linf", np.max(np.abs(u))), ("ux", math.sqrt(ux2)),
                         ("damp", damp), ("delay", delay), ("res", res)):
            r[key].append(float(val))
        if self.sink is not None:
            self.sink({"t": t, "E": r["E"][-1], "calE": calE, "mass": r["mass"][-1],
                       "linf": r["linf"][-1], "ux_l2": r["ux"][-1], "identity_residual": res})


def run(cfg: SolverConfig, sink: Optional[Callable[[dict], None]] = None,
        buffer: Optional[HistoryBuffer] = None) -> SimulationRecord:
    """Integrate to t_end, recording diagnostics every ``record_stride`` steps.

    ``buffer`` restarts from a saved history (its newest slot is u at its
    current time); by default the buffer is built from ``initial_history``.
    """
    buf = initial_buffer(cfg) if buffer is None else buffer
    if buf.grid != cfg.grid or buf.n_tau != cfg.n_tau or buf.dt != cfg.dt:
        raise ValueError("history buffer does not match the configuration")
    hist_l2 = history_l2_norm(buf)
    state = SolverState.from_values(cfg.grid, buf.slot_values(cfg.n_tau), buf.step_index, cfg.dt)
    stepper = stepper_for(cfg)
    rec = _Recorder(cfg, buf, sink)
    snapshots = [(state.t, state.field(cfg.grid))]
    rec(state, buf)
    start = state.step_index
    last = start + cfg.n_steps
    while state.step_index < last:
        state = stepper.step(state, buf)
        k = state.step_index - start
        if k % cfg.record_stride == 0 or state.step_index == last:
            rec(state, buf)
        if cfg.snapshot_stride and k % cfg.snapshot_stride == 0 and state.step_index != last:
            snapshots.append((state.t, state.field(cfg.grid)))
    if len(snapshots) == 1 or snapshots[-1][0] != state.t:
        snapshots.append((state.t, state.field(cfg.grid)))
    r = rec.rows
    return SimulationRecord(
        times=np.array(r["t"]),
        E_series=np.array(r["E"]),
        calE_series=np.array(r["calE"]),
        mass_series=np.array(r["mass"]),
        linf_series=np.array(r["linf"]),
        ux_l2_series=np.array(r["ux"]),
        identity_residual_series=np.array(r["res"]),
        damping_series=np.array(r["damp"]),
        delay_series=np.array(r["delay"]),
        snapshots=snapshots,
        config_echo=dict(cfg.echo),
        nonlinear=bool(cfg.nonlinear),
        tau=cfg.tau,
        lambda0_sup=float(np.max(np.abs(cfg.lambda0.values))),
        lambda_sup=float(np.max(np.abs(cfg.lam.values))),
        history_l2=hist_l2,
        final_state=state.field(cfg.grid),
    )


def run_with_state(cfg: SolverConfig, buffer: Optional[HistoryBuffer] = None):
    """Integrate without diagnostics; returns (final SolverState, buffer)."""
    buf = initial_buffer(cfg) if buffer is None else buffer
    state = SolverState.from_values(cfg.grid, buf.slot_values(cfg.n_tau), buf.step_index, cfg.dt)
    stepper = stepper_for(cfg)
    for _ in range(cfg.n_steps):
        state = stepper.step(state, buf)
    return state, buf
