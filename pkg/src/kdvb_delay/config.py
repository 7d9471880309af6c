"""Run configuration: YAML loading with line-numbered validation, presets.

Example::

    name: preset-A
    grid: {L: 24.0, N: 256}
    time: {dt: 0.001, n_tau: 250, t_end: 23.0}   # or tau: 0.25 instead of n_tau
    model: {nonlinear: false}
    lambda0: {kind: constant, value: 1.0}
    lambda: {kind: gaussian_bump, amplitude: 1.2, center: 0.0, width: 0.5}
    history: {profile: [{kind: gaussian_bump, amplitude: 1.0, center: 0.0, width: 2.0}], time_rate: 0.5}
    certificate: {regime: positive_damping, p: 2, alpha0: 1.0, alpha: 0.15}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .coefficients import CoefficientSpec, HypothesisInput, sample_coefficient
from .grid import Grid, is_localized
from .history import HistorySpec
from .oracle import FDConfig, fd_refinement
from .solver import SolverConfig

PRESET_NAMES = ("preset-A", "preset-B", "preset-C", "preset-N", "linear-constant", "delay-ode")

_SECTIONS = {
    "name": None,
    "description": None,
    "seed": None,
    "grid": {"L", "N"},
    "time": {"dt", "n_tau", "tau", "t_end", "record_stride", "snapshot_stride"},
    "model": {"nonlinear", "periodic_data", "damping_shift"},
    "lambda0": None,
    "lambda": None,
    "history": None,
    "certificate": {"regime", "p", "alpha0", "alpha", "nominal_gamma"},
    "oracle": {"exact_fourier", "delay_ode", "fd_rk4", "fd_refine", "fd_t_end", "tolerance"},
    "output": {"dir", "snapshots"},
}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the field and, when known, the line."""

    def __init__(self, key: str, message: str, source: str = "<config>", line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {key}: {message}")


@dataclass(frozen=True)
class OracleOptions:
    exact_fourier: bool = False
    delay_ode: bool = False
    fd_rk4: bool = False
    fd_refine: int = 2
    fd_t_end: float = 0.5
    tolerance: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    name: str
    L: float
    N: int
    dt: float
    n_tau: int
    t_end: float
    nonlinear: bool
    lambda0: CoefficientSpec
    lam: CoefficientSpec
    history: HistorySpec
    certificate: Optional[HypothesisInput] = None
    nominal_gamma: Optional[float] = None
    record_stride: int = 1
    snapshot_stride: int = 0
    periodic_data: bool = False
    damping_shift: Optional[float] = None
    oracle: OracleOptions = field(default_factory=OracleOptions)
    output_dir: Optional[str] = None
    write_snapshots: bool = False
    seed: int = 0
    description: str = ""
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def tau(self) -> float:
        return self.n_tau * self.dt

    @property
    def grid(self) -> Grid:
        return Grid(self.L, self.N)

    def echo(self) -> dict:
        return to_plain(self.raw)

    def solver_config(self, **overrides) -> SolverConfig:
        g = self.grid
        kw = dict(
            grid=g,
            dt=self.dt,
            n_tau=self.n_tau,
            t_end=self.t_end,
            nonlinear=self.nonlinear,
            lambda0=sample_coefficient(self.lambda0, g),
            lam=sample_coefficient(self.lam, g),
            initial_history=self.history,
            record_stride=self.record_stride,
            snapshot_stride=self.snapshot_stride,
            damping_shift=self.damping_shift,
            echo=self.echo(),
        )
        kw.update(overrides)
        return SolverConfig(**kw)

    def fd_config(self, t_end: Optional[float] = None) -> FDConfig:
        fine = Grid(self.L, self.N * self.oracle.fd_refine)
        r = fd_refinement(self.dt, fine.dx)
        return FDConfig(
            grid=fine,
            dt=self.dt / r,
            n_tau=self.n_tau * r,
            t_end=self.oracle.fd_t_end if t_end is None else t_end,
            nonlinear=self.nonlinear,
            lambda0=self.lambda0,
            lam=self.lam,
            initial_history=self.history,
        )

    def with_time(self, dt: float, t_end: Optional[float] = None) -> "RunConfig":
        """Same physics with a different step; n_tau rescaled to keep tau fixed."""
        n = self.tau / dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"tau={self.tau} is not a multiple of dt={dt}")
        raw = to_plain(self.raw)
        raw.setdefault("time", {})
        raw["time"].update({"dt": dt, "n_tau": int(round(n)), "t_end": self.t_end if t_end is None else t_end})
        raw["time"].pop("tau", None)
        return replace(self, dt=dt, n_tau=int(round(n)), t_end=self.t_end if t_end is None else t_end, raw=raw)


def to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def _compose_with_lines(text: str, source: str):
    """Parse YAML and return (data, {dotted key: line number})."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError("<yaml>", f"malformed YAML: {exc}", source, line) from None
    lines = {}

    def walk(n, prefix):
        if isinstance(n, yaml.MappingNode):
            for k, v in n.value:
                key = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[key] = k.start_mark.line + 1
                walk(v, key)
        elif isinstance(n, yaml.SequenceNode):
            for i, v in enumerate(n.value):
                key = f"{prefix}[{i}]"
                lines[key] = v.start_mark.line + 1
                walk(v, key)

    if node is not None:
        walk(node, "")
    return data, lines


class _Validator:
    def __init__(self, data: dict, lines: dict, source: str):
        self.data = data
        self.lines = lines
        self.source = source

    def fail(self, key: str, message: str):
        line = self.lines.get(key)
        if line is None and "." in key:
            line = self.lines.get(key.rsplit(".", 1)[0])
        raise ConfigError(key, message, self.source, line)

    def section(self, name: str, required: bool = True) -> dict:
        sec = self.data.get(name)
        if sec is None:
            if required:
                self.fail(name, "missing section")
            return {}
        if not isinstance(sec, dict):
            self.fail(name, "expected a mapping")
        allowed = _SECTIONS.get(name)
        if allowed is not None:
            for key in sec:
                if key not in allowed:
                    self.fail(f"{name}.{key}", f"unknown key; allowed: {sorted(allowed)}")
        return sec

    def number(self, sec: dict, name: str, key: str, *, required=True, default=None,
               positive=False, nonnegative=False, integer=False):
        full = f"{name}.{key}"
        if key not in sec or sec[key] is None:
            if required:
                self.fail(full, "missing value")
            return default
        val = sec[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(full, f"expected a number, got {val!r}")
        if not math.isfinite(val):
            self.fail(full, "must be finite")
        if integer and int(val) != val:
            self.fail(full, f"expected an integer, got {val!r}")
        if positive and not val > 0:
            self.fail(full, f"must be positive, got {val!r}")
        if nonnegative and val < 0:
            self.fail(full, f"must be nonnegative, got {val!r}")
        return int(val) if integer else float(val)

    def flag(self, sec: dict, name: str, key: str, default: bool) -> bool:
        val = sec.get(key, default)
        if not isinstance(val, bool):
            self.fail(f"{name}.{key}", f"expected true/false, got {val!r}")
        return val


def parse_config(data: dict, lines: Optional[dict] = None, source: str = "<config>") -> RunConfig:
    v = _Validator(data or {}, lines or {}, source)
    if not isinstance(data, dict):
        v.fail("<root>", "config must be a mapping")
    for key in data:
        if key not in _SECTIONS:
            v.fail(key, f"unknown section; allowed: {sorted(_SECTIONS)}")

    g = v.section("grid")
    L = v.number(g, "grid", "L", positive=True)
    N = v.number(g, "grid", "N", integer=True)
    if N < 8 or N % 2 or N & (N - 1):
        v.fail("grid.N", f"must be a power of two >= 8, got {N}")

    t = v.section("time")
    dt = v.number(t, "time", "dt", positive=True)
    n_tau = v.number(t, "time", "n_tau", required=False, integer=True)
    tau = v.number(t, "time", "tau", required=False, positive=True)
    if n_tau is None and tau is None:
        v.fail("time.tau", "give time.n_tau or time.tau")
    if tau is not None:
        m = tau / dt
        if abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 1:
            v.fail("time.tau", f"tau={tau!r} is not a positive whole multiple of dt={dt!r}")
        if n_tau is not None and n_tau != round(m):
            v.fail("time.tau", f"tau={tau!r} disagrees with n_tau*dt={n_tau * dt!r}")
        n_tau = int(round(m))
    if n_tau < 1:
        v.fail("time.n_tau", "must be >= 1")
    t_end = v.number(t, "time", "t_end", positive=True)
    steps = t_end / dt
    if t_end < dt or abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        v.fail("time.t_end", f"t_end={t_end!r} must be a whole number (>= 1) of steps dt={dt!r}")
    record_stride = v.number(t, "time", "record_stride", required=False, default=1, integer=True)
    if record_stride < 1:
        v.fail("time.record_stride", "must be >= 1")
    snapshot_stride = v.number(t, "time", "snapshot_stride", required=False, default=0,
                               integer=True, nonnegative=True)

    m = v.section("model", required=False)
    nonlinear = v.flag(m, "model", "nonlinear", False)
    periodic = v.flag(m, "model", "periodic_data", False)
    shift = v.number(m, "model", "damping_shift", required=False)

    specs = {}
    for key in ("lambda0", "lambda"):
        sec = v.section(key)
        try:
            specs[key] = CoefficientSpec.from_dict(sec)
        except (ValueError, TypeError) as exc:
            v.fail(key, str(exc))
    hsec = v.section("history")
    try:
        history = HistorySpec.from_dict(hsec)
    except (ValueError, TypeError, KeyError) as exc:
        v.fail("history", str(exc))

    grid = Grid(L, N)
    if not periodic:
        if not is_localized(history.spatial(grid.nodes), grid):
            v.fail("history", "initial data must be below 1e-12 outside |x| <= L/2 "
                              "(enlarge grid.L or set model.periodic_data: true)")
        if not is_localized(specs["lambda"].evaluate(grid.nodes), grid):
            v.fail("lambda", "delay coefficient must be below 1e-12 outside |x| <= L/2 "
                             "(enlarge grid.L or set model.periodic_data: true)")

    hyp = None
    nominal = None
    c = v.section("certificate", required=False)
    if c:
        regime = c.get("regime", "positive_damping")
        p = v.number(c, "certificate", "p", required=True)
        a0 = v.number(c, "certificate", "alpha0", positive=True)
        a = v.number(c, "certificate", "alpha", nonnegative=True)
        nominal = v.number(c, "certificate", "nominal_gamma", required=False, positive=True)
        try:
            hyp = HypothesisInput(n_tau * dt, p, a0, a, regime)
        except ValueError as exc:
            key = "certificate.regime" if "regime" in str(exc) else "certificate.p"
            v.fail(key, str(exc))

    o = v.section("oracle", required=False)
    fd_refine = v.number(o, "oracle", "fd_refine", required=False, default=2, integer=True)
    if fd_refine < 2:
        v.fail("oracle.fd_refine", "the reference grid must be at least twice as fine")
    oracle = OracleOptions(
        exact_fourier=v.flag(o, "oracle", "exact_fourier", False),
        delay_ode=v.flag(o, "oracle", "delay_ode", False),
        fd_rk4=v.flag(o, "oracle", "fd_rk4", False),
        fd_refine=fd_refine,
        fd_t_end=v.number(o, "oracle", "fd_t_end", required=False, default=0.5, positive=True),
        tolerance=v.number(o, "oracle", "tolerance", required=False, positive=True),
    )

    out = v.section("output", required=False)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        v.fail("seed", f"expected a nonnegative integer, got {seed!r}")

    return RunConfig(
        name=str(data.get("name", "run")),
        L=L, N=N, dt=dt, n_tau=n_tau, t_end=t_end,
        nonlinear=nonlinear,
        lambda0=specs["lambda0"],
        lam=specs["lambda"],
        history=history,
        certificate=hyp,
        nominal_gamma=nominal,
        record_stride=record_stride,
        snapshot_stride=snapshot_stride,
        periodic_data=periodic,
        damping_shift=shift,
        oracle=oracle,
        output_dir=out.get("dir"),
        write_snapshots=v.flag(out, "output", "snapshots", False),
        seed=seed,
        description=str(data.get("description", "")),
        raw=data,
    )


def load_config_text(text: str, source: str = "<config>") -> RunConfig:
    data, lines = _compose_with_lines(text, source)
    return parse_config(data, lines, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config: {exc}", str(path)) from None
    return load_config_text(text, str(path))


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return resources.files("kdvb_delay.presets").joinpath(f"{name}.yaml").read_text()


def load_preset(name: str) -> RunConfig:
    return load_config_text(preset_text(name), f"preset:{name}")
