"""Desk-scale acceptance checks, oracle comparisons and the verify driver.

Each criterion returns a :class:`CriterionResult`. Metrics stored in the
artifacts are deterministic; wall-clock timings are kept separately so that
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .coefficients import certify, sample_coefficient
from .config import RunConfig, load_preset
from .diagnostics import (
    SimulationRecord,
    check_holder_interpolation,
    check_interpolation_inequality,
    decay_report,
    derivative_condition,
    monotone_condition,
    pointwise_bound_ratio,
    verify_bt_bound,
)
from .grid import Grid, is_localized
from .history import HistorySpec
from .oracle import delay_ode_reference, exact_linear_constant, fd_rk4_reference, relative_l2
from .reporting import record_summary, write_json, write_series_csv
from .solver import run

BOUND_TOL = 1e-3
RESIDUAL_TOL = 1e-5
ORDER_RANGE = (3.0, 5.0)
EXACT_TOL = 1e-8
EXACT_RUNTIME = 5.0
DELAY_ODE_TOL = 1e-6
FD_TOL = 1e-3
N_RANDOM = 100
SUITE_BUDGET = 600.0

CRITERIA = {
    1: "exact-linear agreement",
    2: "delay-ODE agreement",
    3: "certified linear decay",
    4: "nonlinear decay",
    5: "indefinite damping decay",
    6: "energy identity",
    7: "B_T bound",
    8: "interpolation inequalities",
    9: "negative control",
    10: "cross-discretization",
    11: "determinism",
}

VERIFY_TARGETS = {
    "linear-constant": (1,),
    "delay-ode": (2,),
    "preset-A": (3, 6, 7),
    "preset-B": (4, 6, 10),
    "preset-C": (5, 6),
    "preset-N": (9,),
    "inequalities": (8,),
    "all": tuple(range(1, 12)),
}


class NoOracleError(ValueError):
    """The configuration admits none of the reference solutions."""


@dataclass
class CriterionResult:
    number: int
    passed: bool
    metrics: dict
    detail: str = ""
    seconds: float = field(default=0.0, compare=False)
    note: str = field(default="", compare=False)  # printed, never written (timings)

    @property
    def name(self) -> str:
        return CRITERIA[self.number]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"; {self.note}" if self.note else ""
        return f"[{status}] criterion {self.number:2d} ({self.name}): {self.detail}{extra}"

    def artifact(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": self.passed,
                "metrics": self.metrics, "detail": self.detail}


# ---------------------------------------------------------------- oracles


def _constant_value(spec) -> Optional[float]:
    return float(spec.params["value"]) if spec.kind == "constant" else None


def compare_exact_fourier(cfg: RunConfig, record: Optional[SimulationRecord] = None) -> dict:
    lam0, lam = _constant_value(cfg.lambda0), _constant_value(cfg.lam)
    if lam0 is None or lam != 0.0:
        raise NoOracleError("the exact Fourier oracle needs constant lambda0 and lambda = 0")
    record = record if record is not None else run(cfg.solver_config())
    u0 = record.snapshots[0][1]
    ref = exact_linear_constant(u0, lam0, cfg.t_end)
    got = record.final_state
    return {"oracle": "exact_fourier", "t": cfg.t_end,
            "rel_l2_error": relative_l2(got.values, ref.values),
            "max_abs_error": float(np.max(np.abs(got.values - ref.values)))}


def compare_delay_ode(cfg: RunConfig, record: Optional[SimulationRecord] = None) -> dict:
    lam0, lam = _constant_value(cfg.lambda0), _constant_value(cfg.lam)
    if lam0 is None or lam is None or not cfg.history.is_constant_in_x() or cfg.nonlinear:
        raise NoOracleError("the delay-ODE oracle needs constant coefficients, "
                            "x-independent history and the linear model")
    record = record if record is not None else run(cfg.solver_config())
    hist = cfg.history
    ref = delay_ode_reference(lam0, lam, cfg.tau, lambda s: float(hist.evaluate(np.zeros(1), s)[0]),
                              cfg.t_end, cfg.dt)
    got = record.final_state.values
    expected = float(ref.at(cfg.t_end))
    return {"oracle": "delay_ode_steps", "t": cfg.t_end, "u_final": float(np.mean(got)),
            "reference": expected, "max_abs_error": float(np.max(np.abs(got - expected))),
            "spread": float(np.ptp(got))}


def compare_fd(cfg: RunConfig, t_end: Optional[float] = None) -> dict:
    t_end = cfg.oracle.fd_t_end if t_end is None else t_end
    short = cfg.with_time(cfg.dt, t_end)
    record = run(short.solver_config(record_stride=short.solver_config().n_steps))
    fd_cfg = cfg.fd_config(t_end)
    ref = fd_rk4_reference(fd_cfg).at(t_end)
    stride = fd_cfg.grid.N // cfg.N
    ref_coarse = ref.values[::stride]
    got = record.final_state.values
    return {"oracle": "fd_rk4", "t": t_end, "fd_N": fd_cfg.grid.N, "fd_dt": fd_cfg.dt,
            "rel_l2_error": relative_l2(got, ref_coarse),
            "max_abs_error": float(np.max(np.abs(got - ref_coarse)))}


def compare_oracles(cfg: RunConfig) -> dict:
    """Run every oracle switched on in the config; raise NoOracleError if none is."""
    o = cfg.oracle
    if not (o.exact_fourier or o.delay_ode or o.fd_rk4):
        raise NoOracleError("no oracle enabled; set oracle.exact_fourier, oracle.delay_ode or oracle.fd_rk4")
    out = {}
    record = None
    if o.exact_fourier or o.delay_ode:
        record = run(cfg.solver_config(record_stride=cfg.solver_config().n_steps))
    if o.exact_fourier:
        out["exact_fourier"] = compare_exact_fourier(cfg, record)
    if o.delay_ode:
        out["delay_ode"] = compare_delay_ode(cfg, record)
    if o.fd_rk4:
        out["fd_rk4"] = compare_fd(cfg)
    return out


# ---------------------------------------------------------------- suite


class Suite:
    """Runs criteria, sharing preset simulations between them."""

    def __init__(self, seed: int = 0, out_dir=None, threads: int = 1):
        self.seed = int(seed)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.threads = max(1, int(threads))
        self._records = {}
        self._locks = {}
        self._guard = threading.Lock()

    def config(self, name: str) -> RunConfig:
        return load_preset(name)

    def record(self, name: str) -> SimulationRecord:
        with self._guard:
            lock = self._locks.setdefault(name, threading.Lock())
        with lock:
            if name not in self._records:
                rec = run(self.config(name).solver_config())
                self._records[name] = rec
                if self.out_dir is not None:
                    write_series_csv(rec, self.out_dir / f"{name}_series.csv")
            return self._records[name]

    def certificate(self, name: str):
        cfg = self.config(name)
        g = cfg.grid
        return certify(sample_coefficient(cfg.lambda0, g), sample_coefficient(cfg.lam, g), cfg.certificate)

    # criteria ---------------------------------------------------------

    def criterion_1(self) -> CriterionResult:
        cfg = self.config("linear-constant")
        t0 = time.perf_counter()
        record = run(cfg.solver_config(record_stride=cfg.solver_config().n_steps))
        elapsed = time.perf_counter() - t0
        m = compare_exact_fourier(cfg, record)
        ok = m["rel_l2_error"] < EXACT_TOL and elapsed < EXACT_RUNTIME
        return CriterionResult(1, ok, m, f"rel L2 error {m['rel_l2_error']:.3e} (< {EXACT_TOL:g})",
                               elapsed, f"runtime {elapsed:.2f} s (< {EXACT_RUNTIME:g} s)")

    def criterion_2(self) -> CriterionResult:
        cfg = self.config("delay-ode")
        m = compare_delay_ode(cfg)
        closed = 1.2 * math.exp(-1.0) - 0.2
        m["closed_form"] = closed
        m["closed_form_error"] = abs(m["u_final"] - closed)
        ok = m["closed_form_error"] < DELAY_ODE_TOL and m["max_abs_error"] < DELAY_ODE_TOL
        return CriterionResult(2, ok, m, f"u(1) = {m['u_final']:.9f} vs {closed:.9f}, "
                                         f"error {m['closed_form_error']:.3e} (< {DELAY_ODE_TOL:g})")

    def _decay(self, number: int, name: str, extra_checks: Callable[[SimulationRecord, float], dict]):
        cert = self.certificate(name)
        metrics = {"certificate_passed": cert.passed, "failure_reasons": list(cert.failure_reasons),
                   "gamma": cert.gamma}
        if not cert.passed:
            return CriterionResult(number, False, metrics, "certificate rejected: " + "; ".join(cert.failure_reasons))
        gamma = cert.gamma
        rec = self.record(name)
        horizon = 8.0 / gamma
        metrics["horizon"] = horizon
        metrics["t_final"] = float(rec.times[-1])
        covered = rec.times[-1] >= horizon * (1 - 1e-9)
        window = rec.truncated(horizon)
        ratio = pointwise_bound_ratio(window, gamma)
        metrics["max_bound_ratio_minus_1"] = float(ratio.max())
        report = decay_report(rec, gamma)
        metrics["fitted_rate"] = report.fitted_rate
        ok = covered and bool(ratio.max() <= BOUND_TOL)
        detail = (f"gamma {gamma:.5f}, max calE/(calE0 e^-gt) - 1 = {ratio.max():.3e} (<= {BOUND_TOL:g}) "
                  f"on [0, {horizon:.2f}], fitted rate {report.fitted_rate:.4f}")
        if not covered:
            detail += f"; record ends at {rec.times[-1]:.3f} < 8/gamma"
        more = extra_checks(window, gamma)
        metrics.update(more.get("metrics", {}))
        ok = ok and more.get("passed", True)
        if more.get("detail"):
            detail += "; " + more["detail"]
        return CriterionResult(number, ok, metrics, detail)

    def criterion_3(self) -> CriterionResult:
        def derivative_check(rec, gamma):
            margin = derivative_condition(rec, gamma, BOUND_TOL)
            return {"passed": bool(margin.min() >= 0), "metrics": {"min_derivative_margin": float(margin.min())},
                    "detail": f"min derivative-condition margin {margin.min():.3e} (>= 0)"}
        return self._decay(3, "preset-A", derivative_check)

    def criterion_4(self) -> CriterionResult:
        def monotone_check(rec, gamma):
            inc = monotone_condition(rec)
            return {"passed": inc <= BOUND_TOL, "metrics": {"max_relative_increase": inc},
                    "detail": f"max calE increase {inc:.3e} calE(0) (<= {BOUND_TOL:g})"}
        return self._decay(4, "preset-B", monotone_check)

    def criterion_5(self) -> CriterionResult:
        return self._decay(5, "preset-C", lambda rec, gamma: {})

    def criterion_6(self, presets=("preset-A", "preset-B", "preset-C")) -> CriterionResult:
        metrics, parts, ok = {}, [], True
        for name in presets:
            res = float(np.max(np.abs(self.record(name).identity_residual_series)))
            cfg = self.config(name)
            coarse = run(cfg.with_time(2 * cfg.dt, 2.0).solver_config())
            fine = run(cfg.with_time(cfg.dt, 2.0).solver_config())
            rc = float(np.max(np.abs(coarse.identity_residual_series)))
            rf = float(np.max(np.abs(fine.identity_residual_series)))
            ratio = rc / rf if rf > 0 else math.inf
            good = res < RESIDUAL_TOL and ORDER_RANGE[0] <= ratio <= ORDER_RANGE[1]
            ok = ok and good
            metrics[name] = {"max_residual": res, "residual_coarse": rc, "residual_fine": rf, "ratio": ratio}
            parts.append(f"{name} residual {res:.2e}, ratio {ratio:.2f}")
        return CriterionResult(6, ok, metrics, "; ".join(parts) +
                               f" (residual < {RESIDUAL_TOL:g}, ratio in [{ORDER_RANGE[0]:g}, {ORDER_RANGE[1]:g}])")

    def random_histories(self, n: int = N_RANDOM):
        rng = np.random.default_rng(self.seed)
        for _ in range(n):
            terms = []
            for _ in range(int(rng.integers(1, 4))):
                terms.append({"kind": "gaussian_bump", "amplitude": float(rng.uniform(-2.0, 2.0)),
                              "center": float(rng.uniform(-3.0, 3.0)), "width": float(rng.uniform(0.8, 1.5))})
            yield HistorySpec(tuple(terms), float(rng.uniform(-1.0, 1.0)))

    def criterion_7(self) -> CriterionResult:
        base = self.config("preset-A")
        verdict = verify_bt_bound(self.record("preset-A"))
        short = base.with_time(base.dt, 1.0)
        failures, min_slack_ratio = 0, math.inf
        for hist in self.random_histories():
            rec = run(short.solver_config(initial_history=hist, record_stride=10))
            v = verify_bt_bound(rec, 1.0)
            failures += not v.satisfied
            min_slack_ratio = min(min_slack_ratio, v.slack / v.rhs)
        metrics = {"preset_A": {"lhs": verdict.lhs, "rhs": verdict.rhs, "C_T": verdict.C_T},
                   "random_runs": N_RANDOM, "random_failures": failures,
                   "min_relative_slack": min_slack_ratio}
        ok = verdict.satisfied and failures == 0
        return CriterionResult(7, ok, metrics, f"preset-A lhs {verdict.lhs:.3e} <= rhs {verdict.rhs:.3e}; "
                                               f"{N_RANDOM - failures}/{N_RANDOM} random runs satisfied "
                                               f"(min relative slack {min_slack_ratio:.3f})")

    def random_fields(self, n: int = N_RANDOM):
        rng = np.random.default_rng(self.seed + 1)
        g = Grid(24.0, 512)
        x = g.nodes
        for _ in range(n):
            v = np.zeros_like(x)
            for _ in range(int(rng.integers(1, 5))):
                a = rng.uniform(-3.0, 3.0)
                c = rng.uniform(-3.0, 3.0)
                w = rng.uniform(0.4, 1.5)
                v += a * np.exp(-((x - c) / w) ** 2) * (1.0 + 0.5 * np.sin(rng.uniform(0, 3) * x))
            if is_localized(v, g):
                yield g.field(v), float(rng.uniform(1.1, 6.0))

    def criterion_8(self) -> CriterionResult:
        n_fields, interp_fail, holder_fail = 0, 0, 0
        worst_interp, worst_holder = -math.inf, -math.inf
        for f, p in self.random_fields():
            n_fields += 1
            a = check_interpolation_inequality(f)
            b = check_holder_interpolation(f, p)
            interp_fail += not a.holds
            holder_fail += not b.holds
            worst_interp = max(worst_interp, a.lhs / a.rhs)
            worst_holder = max(worst_holder, b.lhs / b.rhs)
        metrics = {"fields": n_fields, "interpolation_violations": interp_fail, "holder_violations": holder_fail,
                   "max_interpolation_ratio": worst_interp, "max_holder_ratio": worst_holder}
        ok = n_fields == N_RANDOM and interp_fail == 0 and holder_fail == 0
        return CriterionResult(8, ok, metrics, f"{n_fields} fields, {interp_fail} + {holder_fail} violations; "
                                               f"max lhs/rhs {worst_interp:.4f} and {worst_holder:.4f}")

    def criterion_9(self) -> CriterionResult:
        cfg = self.config("preset-N")
        cert = self.certificate("preset-N")
        named = [r.split(":")[0] for r in cert.failure_reasons]
        nominal = cfg.nominal_gamma
        rec = self.record("preset-N")
        report = decay_report(rec, nominal)
        metrics = {"certificate_passed": cert.passed, "failure_reasons": named, "nominal_gamma": nominal,
                   "bound_satisfied": report.bound_satisfied, "fitted_rate": report.fitted_rate,
                   "max_violation": report.max_violation}
        ok = (not cert.passed) and bool(named) and not report.bound_satisfied
        return CriterionResult(9, ok, metrics, f"certificate rejected ({', '.join(named) or 'none'}); "
                                               f"bound at nominal gamma {nominal:g} satisfied = "
                                               f"{report.bound_satisfied}, fitted rate {report.fitted_rate:.3f}")

    def criterion_10(self) -> CriterionResult:
        cfg = self.config("preset-B")
        m = compare_fd(cfg, 0.5)
        ok = m["rel_l2_error"] < FD_TOL
        return CriterionResult(10, ok, m, f"rel L2 discrepancy {m['rel_l2_error']:.3e} (< {FD_TOL:g}) "
                                          f"against N={m['fd_N']} finite differences")

    def run_criteria(self, numbers) -> list:
        numbers = [n for n in numbers if n != 11]
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                futures = [pool.submit(self._timed, n) for n in numbers]
                results = [f.result() for f in futures]
        else:
            results = [self._timed(n) for n in numbers]
        if self.out_dir is not None:
            for r in results:
                write_json(r.artifact(), self.out_dir / f"criterion_{r.number:02d}.json")
        return results

    def _timed(self, n: int) -> CriterionResult:
        t0 = time.perf_counter()
        r = getattr(self, f"criterion_{n}")()
        if not r.seconds:
            r.seconds = time.perf_counter() - t0
        return r


def digest_dir(path) -> dict:
    path = Path(path)
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.iterdir()) if p.is_file()}


def verify(target: str, out_dir, seed: int = 0, threads: int = 1,
           echo: Callable[[str], None] = print) -> list:
    """Run the criteria mapped to ``target`` and write artifacts under ``out_dir``.

    For ``all`` the suite is executed twice into separate directories and the
    artifacts are compared byte for byte (criterion 11).
    """
    if target not in VERIFY_TARGETS:
        raise KeyError(f"unknown verify target {target!r}; available: {', '.join(VERIFY_TARGETS)}")
    numbers = VERIFY_TARGETS[target]
    out_dir = Path(out_dir)
    t0 = time.perf_counter()
    first = out_dir / "run1" if 11 in numbers else out_dir
    first.mkdir(parents=True, exist_ok=True)
    results = Suite(seed, first, threads).run_criteria(numbers)
    for r in results:
        echo(r.line())
    if 11 in numbers:
        second = out_dir / "run2"
        second.mkdir(parents=True, exist_ok=True)
        Suite(seed, second, threads).run_criteria(numbers)
        elapsed = time.perf_counter() - t0
        d1, d2 = digest_dir(first), digest_dir(second)
        same = d1 == d2 and bool(d1)
        ok = same and elapsed < SUITE_BUDGET
        r = CriterionResult(11, ok, {"files": len(d1), "identical": same},
                            f"{len(d1)} artifacts byte-identical = {same}", elapsed,
                            f"two full passes in {elapsed:.1f} s (< {SUITE_BUDGET:g} s)")
        if not same:
            r.note += "; differing: " + ", ".join(sorted(k for k in d1.keys() | d2.keys()
                                                         if d1.get(k) != d2.get(k)))
        write_json(r.artifact(), out_dir / "criterion_11.json")
        echo(r.line())
        results.append(r)
    return results


def generic_checks(cfg: RunConfig, record: SimulationRecord) -> dict:
    """Checks for an arbitrary config: identity residual, certificate and decay bound, oracles."""
    checks = {"identity_residual": {
        "value": float(np.max(np.abs(record.identity_residual_series))), "limit": RESIDUAL_TOL}}
    checks["identity_residual"]["passed"] = checks["identity_residual"]["value"] < RESIDUAL_TOL
    if cfg.certificate is not None:
        g = cfg.grid
        cert = certify(sample_coefficient(cfg.lambda0, g), sample_coefficient(cfg.lam, g), cfg.certificate)
        entry = {"certificate_passed": cert.passed, "failure_reasons": list(cert.failure_reasons)}
        if cert.passed:
            ratio = pointwise_bound_ratio(record, cert.gamma)
            entry.update(gamma=cert.gamma, max_bound_ratio_minus_1=float(ratio.max()),
                         passed=bool(ratio.max() <= BOUND_TOL))
        else:
            entry["passed"] = False
        checks["decay"] = entry
    o = cfg.oracle
    tol = o.tolerance
    if o.exact_fourier:
        m = compare_exact_fourier(cfg, record)
        m["passed"] = m["rel_l2_error"] < (tol or EXACT_TOL)
        checks["exact_fourier"] = m
    if o.delay_ode:
        m = compare_delay_ode(cfg, record)
        m["passed"] = m["max_abs_error"] < (tol or DELAY_ODE_TOL)
        checks["delay_ode"] = m
    if o.fd_rk4:
        m = compare_fd(cfg)
        m["passed"] = m["rel_l2_error"] < (tol or FD_TOL)
        checks["fd_rk4"] = m
    return checks


__all__ = [
    "CRITERIA", "VERIFY_TARGETS", "CriterionResult", "NoOracleError", "Suite",
    "compare_delay_ode", "compare_exact_fourier", "compare_fd", "compare_oracles",
    "generic_checks", "record_summary", "verify",
]
