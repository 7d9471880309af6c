"""Reference solutions used to cross-check the spectral solver.

- exact Fourier propagation for constant damping and no delay feedback
- scalar method-of-steps RK4 for spatially constant data
- second-order central differences + RK4 on a finer grid
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import Field, Grid

FD_CFL = 0.05


@dataclass
class OracleResult:
    times: np.ndarray
    values: list  # Field per time, or floats
    method_tag: str

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("oracle times must be strictly increasing")
        if self.method_tag not in ("exact_fourier", "delay_ode_steps", "fd_rk4"):
            raise ValueError(f"unknown method tag {self.method_tag!r}")

    def at(self, t: float):
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"no oracle sample at t={t}")
        return self.values[i]


def exact_linear_constant(u0: Field, lambda0_const: float, t: float) -> Field:
    """Propagate u_t + u_xxx - u_xx + c u = 0 exactly, mode by mode."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    k = u0.grid.wavenumbers
    u_hat = np.fft.fft(u0.values) * np.exp((1j * k ** 3 - k ** 2 - lambda0_const) * t)
    return Field(u0.grid, np.fft.ifft(u_hat).real)


def delay_ode_reference(lambda0: float, lam: float, tau: float, history: Callable[[float], float],
                        t_end: float, dt: float) -> OracleResult:
    """RK4 for u' = -lambda0 u - lam u(t - tau), delayed values from a sample table.

    Half-step delayed values are linear interpolants of the two neighbouring
    samples.
    """
    m = tau / dt
    if abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 1:
        raise ValueError(f"tau={tau!r} is not a positive multiple of dt={dt!r}")
    m = int(round(m))
    n = int(round(t_end / dt))
    samples = np.empty(m + n + 1)
    for j in range(m + 1):
        samples[j] = float(history((j - m) * dt))

    def f(u, ud):
        return -lambda0 * u - lam * ud

    for i in range(n):
        u = samples[m + i]
        d0, d1 = samples[i], samples[i + 1]
        dh = 0.5 * (d0 + d1)
        k1 = f(u, d0)
        k2 = f(u + 0.5 * dt * k1, dh)
        k3 = f(u + 0.5 * dt * k2, dh)
        k4 = f(u + dt * k3, d1)
        samples[m + i + 1] = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    times = np.arange(n + 1) * dt
    return OracleResult(times, list(samples[m:]), "delay_ode_steps")


def fd_derivatives(u: np.ndarray, dx: float):
    """Periodic second-order central differences for u_x, u_xx, u_xxx."""
    up1, um1 = np.roll(u, -1), np.roll(u, 1)
    up2, um2 = np.roll(u, -2), np.roll(u, 2)
    ux = (up1 - um1) / (2 * dx)
    uxx = (up1 - 2 * u + um1) / dx ** 2
    uxxx = (up2 - 2 * up1 + 2 * um1 - um2) / (2 * dx ** 3)
    return ux, uxx, uxxx


def _as_fn(obj):
    if hasattr(obj, "evaluate"):
        return obj.evaluate
    return obj


@dataclass(frozen=True)
class FDConfig:
    """Physical setup for the finite-difference reference.

    Coefficients and history are callables (or objects with ``evaluate``) so
    they can be sampled on any grid.
    """

    grid: Grid
    dt: float
    n_tau: int
    t_end: float
    nonlinear: bool
    lambda0: object
    lam: object
    initial_history: object

    @property
    def tau(self) -> float:
        return self.n_tau * self.dt


def fd_rk4_reference(cfg: FDConfig, output_times: Optional[Sequence[float]] = None) -> OracleResult:
    """Method of lines with central differences and classic RK4.

    The delayed field is frozen over each step and read from a ring of
    n_tau + 1 stored states.
    """
    g = cfg.grid
    dx = g.dx
    if cfg.dt > FD_CFL * dx ** 3:
        raise ValueError(f"dt={cfg.dt:g} violates the explicit CFL bound {FD_CFL} * dx^3 = {FD_CFL * dx ** 3:g}")
    x = g.nodes
    lam0 = np.asarray(_as_fn(cfg.lambda0)(x), dtype=float) * np.ones_like(x)
    lam = np.asarray(_as_fn(cfg.lam)(x), dtype=float) * np.ones_like(x)
    hist = _as_fn(cfg.initial_history)
    n_tau = int(cfg.n_tau)
    ring = np.empty((n_tau + 1, g.N))
    for j in range(n_tau + 1):
        ring[j] = hist(x, (j - n_tau) * cfg.dt)
    oldest = 0
    u = ring[n_tau].copy()
    n_steps = int(round(cfg.t_end / cfg.dt))
    if output_times is None:
        out_steps = {n_steps}
    else:
        out_steps = {int(round(t / cfg.dt)) for t in output_times}
    times, values = [], []
    if 0 in out_steps:
        times.append(0.0)
        values.append(Field(g, u))

    def rhs(v, ud):
        vx, vxx, vxxx = fd_derivatives(v, dx)
        out = -vxxx + vxx - lam0 * v - lam * ud
        if cfg.nonlinear:
            out -= v * vx
        return out

    dt = cfg.dt
    for n in range(1, n_steps + 1):
        ud = ring[oldest]
        k1 = rhs(u, ud)
        k2 = rhs(u + 0.5 * dt * k1, ud)
        k3 = rhs(u + 0.5 * dt * k2, ud)
        k4 = rhs(u + dt * k3, ud)
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise RuntimeError(f"finite-difference reference blew up at step {n}")
        ring[oldest] = u
        oldest = (oldest + 1) % (n_tau + 1)
        if n in out_steps:
            times.append(n * dt)
            values.append(Field(g, u))
    return OracleResult(np.array(times), values, "fd_rk4")


def fd_refinement(dt_main: float, dx_fine: float, min_divisor: int = 4) -> int:
    """Smallest integer r >= min_divisor with dt_main / r inside the FD CFL bound."""
    r = max(min_divisor, math.ceil(dt_main / (FD_CFL * dx_fine ** 3) - 1e-12))
    while dt_main / r > FD_CFL * dx_fine ** 3:
        r += 1
    return r


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||."""
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))
