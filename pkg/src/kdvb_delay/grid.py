"""Periodic grid on [-L, L), spectral derivatives, and quadrature norms.

The real line is truncated to a periodic box. Transforms use the real-input
FFT convention, so inverse transforms are real by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridMismatchError(ValueError):
    """Raised when fields living on different grids are combined."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh x_j = -L + j*dx, dx = 2L/N."""

    L: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"half width L must be positive, got {self.L!r}")
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise ValueError(f"node count N must be an even integer >= 8, got {self.N!r}")
        if self.N & (self.N - 1):
            raise ValueError(f"node count N must be a power of two, got {self.N!r}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -self.L + np.arange(self.N) * self.dx
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Full-spectrum wavenumbers k_m = pi*m/L in FFT ordering."""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N) * (np.pi / self.L)
        k.flags.writeable = False
        return k

    @cached_property
    def rwavenumbers(self) -> np.ndarray:
        """Nonnegative wavenumbers matching the real-input transform."""
        k = np.arange(self.N // 2 + 1) * (np.pi / self.L)
        k.flags.writeable = False
        return k

    @property
    def k_max(self) -> float:
        return np.pi * (self.N // 2) / self.L

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean keep-mask over the real-input spectrum (2/3 rule)."""
        m = np.arange(self.N // 2 + 1)
        keep = m <= self.N / 3
        keep.flags.writeable = False
        return keep

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft(values)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfft(coeffs, n=self.N)

    def field(self, values) -> "Field":
        return Field(self, values)

    def sample(self, fn) -> "Field":
        return Field(self, fn(self.nodes))


def make_grid(L: float, N: int) -> Grid:
    return Grid(L, N)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a Grid. Immutable."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def _check(self, other: "Field") -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def _combine(self, other, op):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, op(self.values, other.values))
        return Field(self.grid, op(self.values, float(other)))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return Field(self.grid, float(other) - self.values)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __abs__(self):
        return Field(self.grid, np.abs(self.values))

    def __len__(self):
        return self.grid.N


def derivative(f: Field, order: int) -> Field:
    """Spectral derivative of order 1, 2 or 3.

    The Nyquist mode is dropped for odd orders; its derivative is not real.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"unsupported derivative order {order!r}")
    return Field(f.grid, spectral_derivative(f.grid, f.values, order))


def spectral_derivative(grid: Grid, values: np.ndarray, order: int) -> np.ndarray:
    coeffs = grid.forward(values) * (1j * grid.rwavenumbers) ** order
    if order % 2:
        coeffs[-1] = 0.0
    return grid.inverse(coeffs)


def lp_norm(f: Field, p: float) -> float:
    """Rectangle-rule L^p norm; p = inf gives the sampled max."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p!r}")
    a = np.abs(f.values)
    if p == 1:
        return float(np.sum(a) * f.grid.dx)
    if p == 2:
        return float(np.sqrt(np.dot(a, a) * f.grid.dx))
    # scale out the max so large p does not overflow
    top = a.max()
    if top == 0.0:
        return 0.0
    return float(top * (np.sum((a / top) ** p) * f.grid.dx) ** (1.0 / p))


def inner_product(f: Field, g: Field) -> float:
    f._check(g)
    return float(np.dot(f.values, g.values) * f.grid.dx)


def mass(f: Field) -> float:
    return float(np.sum(f.values) * f.grid.dx)


def dealias(f_hat: np.ndarray) -> np.ndarray:
    """Zero the modes |m| > N/3 of a full-length spectrum (FFT ordering)."""
    f_hat = np.asarray(f_hat)
    n = f_hat.shape[-1]
    m = np.fft.fftfreq(n, d=1.0 / n)
    out = f_hat.copy()
    out[..., np.abs(m) > n / 3] = 0.0
    return out


def is_localized(values: np.ndarray, grid: Grid, tol: float = 1e-12) -> bool:
    """True when |values| < tol outside |x| <= L/2."""
    outside = np.abs(grid.nodes) > grid.L / 2
    return bool(np.all(np.abs(np.asarray(values)[outside]) < tol))
