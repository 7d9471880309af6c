"""Ring buffer holding the solution over the last delay window [t - tau, t].

The delay is tau = n_tau * dt exactly, so u(t - tau) is always a stored slot
and never interpolated.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coefficients import CoefficientSpec
from .grid import Field, Grid, GridMismatchError

_MAGIC = b"KDVBHIST"
_VERSION = 1
_HEADER = struct.Struct("<8sIqqddd")


class HistoryBuffer:
    """n_tau + 1 slots: oldest is u(., t - tau), newest is u(., t)."""

    def __init__(self, grid: Grid, n_tau: int, dt: float, slots: np.ndarray, step_index: int = 0):
        if int(n_tau) != n_tau or n_tau < 1:
            raise ValueError(f"n_tau must be a positive integer, got {n_tau!r}")
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        slots = np.array(slots, dtype=float)
        if slots.shape != (n_tau + 1, grid.N):
            raise ValueError(f"expected slots of shape {(n_tau + 1, grid.N)}, got {slots.shape}")
        if not np.all(np.isfinite(slots)):
            raise ValueError("history samples must be finite")
        self.grid = grid
        self.n_tau = int(n_tau)
        self.dt = float(dt)
        self.step_index = int(step_index)
        self._slots = slots
        self._head = 0  # physical row of the oldest slot
        self._wcache = None  # (abs_lambda array, per-row weights)
        self._age_weights = np.exp(-(self.n_tau - np.arange(self.n_tau + 1)) * self.dt)

    @property
    def tau(self) -> float:
        return self.n_tau * self.dt

    @property
    def current_time(self) -> float:
        return self.step_index * self.dt

    @property
    def slot_count(self) -> int:
        return self._slots.shape[0]

    def slot_times(self) -> np.ndarray:
        return (self.step_index - self.n_tau + np.arange(self.n_tau + 1)) * self.dt

    def ordered(self) -> np.ndarray:
        """Slots oldest-first as a fresh array."""
        return np.roll(self._slots, -self._head, axis=0)

    def slot_values(self, age_from_oldest: int) -> np.ndarray:
        """Read-only view of the slot ``age_from_oldest`` positions after the oldest."""
        if not 0 <= age_from_oldest <= self.n_tau:
            raise IndexError(age_from_oldest)
        v = self._slots[(self._head + age_from_oldest) % (self.n_tau + 1)]
        return v.view()

    def delayed_state(self, offset: int = 0) -> Field:
        """u(., t - tau + offset*dt); offset 0 is the delayed state proper."""
        return Field(self.grid, self.slot_values(offset))

    def newest(self) -> Field:
        return Field(self.grid, self.slot_values(self.n_tau))

    def push(self, newest) -> None:
        if isinstance(newest, Field):
            if newest.grid != self.grid:
                raise GridMismatchError("pushed field lives on a different grid")
            newest = newest.values
        row = self._head
        self._slots[row] = newest
        self._head = (row + 1) % (self.n_tau + 1)
        self.step_index += 1
        if self._wcache is not None:
            lam, w = self._wcache
            w[row] = np.dot(self._slots[row] ** 2, lam) * self.grid.dx

    def slot_weights(self, abs_lambda: Field) -> np.ndarray:
        """w(s_j) = int |lambda| u(x, s_j)^2 dx for each slot, oldest first."""
        if abs_lambda.grid != self.grid:
            raise GridMismatchError("abs_lambda lives on a different grid")
        lam = abs_lambda.values
        if self._wcache is None or self._wcache[0] is not lam:
            if np.any(lam < 0):
                raise ValueError("abs_lambda must be nonnegative")
            # each row is recomputed from its own slot on push, so nothing drifts
            self._wcache = (lam, (self._slots * self._slots) @ lam * self.grid.dx)
        return np.roll(self._wcache[1], -self._head)

    def memory_integral(self, abs_lambda: Field) -> float:
        """1/2 int_{t-tau}^t e^{-(t-s)} int |lambda| u^2 dx ds, trapezoid in s."""
        g = self._age_weights * self.slot_weights(abs_lambda)
        return float(0.5 * self.dt * (g.sum() - 0.5 * (g[0] + g[-1])))

    def copy(self) -> "HistoryBuffer":
        return HistoryBuffer(self.grid, self.n_tau, self.dt, self.ordered(), self.step_index)

    def save(self, path) -> None:
        """Binary checkpoint: header then oldest-first slots as little-endian float64."""
        header = _HEADER.pack(
            _MAGIC, _VERSION, self.grid.N, self.n_tau, self.dt, self.current_time, self.grid.L
        )
        payload = self.ordered().astype("<f8").tobytes()
        Path(path).write_bytes(header + payload)

    @classmethod
    def load(cls, path) -> "HistoryBuffer":
        raw = Path(path).read_bytes()
        magic, version, N, n_tau, dt, t, L = _HEADER.unpack_from(raw)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError(f"{path}: not a history checkpoint")
        slots = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
        if slots.size != (n_tau + 1) * N:
            raise ValueError(f"{path}: truncated checkpoint")
        step = int(round(t / dt))
        return cls(Grid(L, N), n_tau, dt, slots.reshape(n_tau + 1, N).astype(float), step)


@dataclass(frozen=True)
class HistorySpec:
    """Separable initial history u0(x, s) = profile(x) * exp(time_rate * s).

    ``profile`` is a list of coefficient-style dicts that are summed; besides
    the coefficient kinds it accepts ``{"kind": "sine", "amplitude", "wavenumber",
    "phase"}``.
    """

    profile: tuple
    time_rate: float = 0.0

    def __post_init__(self):
        parts = self.profile
        if isinstance(parts, dict):
            parts = (parts,)
        parts = tuple(dict(p) for p in parts)
        if not parts:
            raise ValueError("history profile needs at least one term")
        for part in parts:
            if part.get("kind") == "sine":
                for key in ("amplitude", "wavenumber"):
                    if key not in part:
                        raise ValueError(f"sine profile is missing {key}")
            else:
                CoefficientSpec.from_dict(part)
        if not np.isfinite(self.time_rate):
            raise ValueError("time_rate must be finite")
        object.__setattr__(self, "profile", parts)

    @classmethod
    def from_dict(cls, d: dict) -> "HistorySpec":
        d = dict(d)
        rate = float(d.pop("time_rate", 0.0))
        profile = d.pop("profile", None)
        if profile is None:
            profile = d  # single inline term
        return cls(profile, rate)

    def to_dict(self) -> dict:
        return {"profile": [dict(p) for p in self.profile], "time_rate": self.time_rate}

    def spatial(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(x, dtype=float))
        for part in self.profile:
            if part["kind"] == "sine":
                a, k = float(part["amplitude"]), float(part["wavenumber"])
                out = out + a * np.sin(k * x + float(part.get("phase", 0.0)))
            else:
                out = out + CoefficientSpec.from_dict(part).evaluate(x)
        return out

    def evaluate(self, x: np.ndarray, s: float) -> np.ndarray:
        return self.spatial(x) * np.exp(self.time_rate * s)

    def is_constant_in_x(self) -> bool:
        return all(p["kind"] == "constant" for p in self.profile)


def init_history(initial, grid: Grid, n_tau: int, dt: float) -> HistoryBuffer:
    """Fill slots with initial(x, s) at s = -n_tau*dt, ..., -dt, 0.

    ``initial`` is a callable of (x array, s float) or anything with an
    ``evaluate(x, s)`` method.
    """
    if int(n_tau) != n_tau or n_tau < 1:
        raise ValueError(f"n_tau must be a positive integer, got {n_tau!r}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    fn = initial.evaluate if hasattr(initial, "evaluate") else initial
    x = grid.nodes
    slots = np.empty((n_tau + 1, grid.N))
    for j in range(n_tau + 1):
        s = (j - n_tau) * dt
        slots[j] = np.broadcast_to(np.asarray(fn(x, s), dtype=float), (grid.N,))
    if not np.all(np.isfinite(slots)):
        raise ValueError("initial history produced non-finite samples")
    return HistoryBuffer(grid, n_tau, dt, slots)


def delayed_state(buf: HistoryBuffer) -> Field:
    return buf.delayed_state()


def push(buf: HistoryBuffer, newest: Field) -> None:
    buf.push(newest)


def memory_integral(buf: HistoryBuffer, abs_lambda: Field) -> float:
    return buf.memory_integral(abs_lambda)
