"""Command-line interface: simulate, certify, verify, compare-oracle.

Exit codes: 0 success, 1 a check or criterion failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .acceptance import VERIFY_TARGETS, NoOracleError, compare_oracles, generic_checks, verify
from .coefficients import certify, sample_coefficient
from .config import PRESET_NAMES, ConfigError, RunConfig, load_config, load_preset
from .diagnostics import DecayFitError, decay_report
from .reporting import base_report, record_summary, write_json, write_series_csv, write_state_csv
from .solver import BlowUpError, StabilityBoundError, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _config(args) -> RunConfig:
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        try:
            cfg = load_preset(args.preset)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    else:
        raise UsageError("a run needs --config PATH or --preset NAME")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output_dir or os.path.join("runs", cfg.name))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _certificate(cfg: RunConfig):
    if cfg.certificate is None:
        return None
    g = cfg.grid
    return certify(sample_coefficient(cfg.lambda0, g), sample_coefficient(cfg.lam, g), cfg.certificate)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    record = run(cfg.solver_config())
    write_series_csv(record, out / "series.csv")
    write_state_csv(record.final_state, out / "final_state.csv")
    if cfg.write_snapshots:
        for i, (t, f) in enumerate(record.snapshots):
            write_state_csv(f, out / f"snapshot_{i:04d}.csv")
    cert = _certificate(cfg)
    sections = {"summary": record_summary(record)}
    if cert is not None:
        write_json(base_report(cfg.echo(), certificate=cert.to_dict()), out / "certificate.json")
        sections["certificate"] = cert.to_dict(include_fields=False)
        if cert.passed:
            try:
                sections["decay"] = decay_report(record, cert).to_dict()
            except DecayFitError as exc:
                sections["decay"] = {"skipped": str(exc)}
    write_json(base_report(cfg.echo(), **sections), out / "report.json")
    print(f"{cfg.name}: {len(record.times)} records to t = {record.times[-1]:g}; artifacts in {out}")
    return EXIT_OK


def cmd_certify(args) -> int:
    cfg = _config(args)
    if cfg.certificate is None:
        raise UsageError("the config has no certificate section")
    out = _out_dir(args, cfg)
    cert = _certificate(cfg)
    write_json(base_report(cfg.echo(), certificate=cert.to_dict()), out / "certificate.json")
    if cert.passed:
        print(f"{cfg.name}: certified, gamma = {cert.gamma:.6g}, ||beta||_p = {cert.beta_norm:.6g} "
              f"< {cert.bound:.6g}")
        return EXIT_OK
    print(f"{cfg.name}: rejected")
    for reason in cert.failure_reasons:
        print(f"  {reason}")
    return EXIT_FAIL


def cmd_verify(args) -> int:
    target = args.target
    if target in VERIFY_TARGETS:
        seed = 0 if args.seed is None else args.seed
        out = Path(args.out or os.path.join("runs", f"verify-{target}"))
        results = verify(target, out, seed=seed, threads=args.threads)
        n_pass = sum(r.passed for r in results)
        print(f"{n_pass}/{len(results)} criteria passed; artifacts in {out}")
        return EXIT_OK if n_pass == len(results) else EXIT_FAIL
    if target.endswith((".yaml", ".yml")) or os.path.exists(target):
        cfg = load_config(target)
        out = _out_dir(args, cfg)
        record = run(cfg.solver_config())
        write_series_csv(record, out / "series.csv")
        checks = generic_checks(cfg, record)
        write_json(base_report(cfg.echo(), checks=checks), out / "verify.json")
        ok = True
        for name, c in checks.items():
            ok = ok and c["passed"]
            print(f"[{'PASS' if c['passed'] else 'FAIL'}] {name}")
        return EXIT_OK if ok else EXIT_FAIL
    raise UsageError(f"unknown verify target {target!r}; choose one of {', '.join(VERIFY_TARGETS)} "
                     f"or a config path")


def cmd_compare_oracle(args) -> int:
    cfg = _config(args)
    try:
        comparisons = compare_oracles(cfg)
    except NoOracleError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args, cfg)
    write_json(base_report(cfg.echo(), comparisons=comparisons), out / "oracle.json")
    ok = True
    for name, m in comparisons.items():
        err = m.get("rel_l2_error", m.get("max_abs_error"))
        limit = cfg.oracle.tolerance
        good = limit is None or err < limit
        ok = ok and good
        print(f"{name}: error {err:.3e}" + ("" if limit is None else f" (limit {limit:g})"))
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--preset", metavar="NAME", help=f"built-in preset: {', '.join(PRESET_NAMES)}")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="U64", help="seed for randomized sweeps")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for verify")

    p = argparse.ArgumentParser(prog="kdvb", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run a simulation and write series + reports")
    sub.add_parser("certify", parents=[common], help="check the decay hypotheses for a config")
    v = sub.add_parser("verify", parents=[common], help="run acceptance checks")
    v.add_argument("target", help=f"{', '.join(VERIFY_TARGETS)} or a config path")
    sub.add_parser("compare-oracle", parents=[common], help="compare against the enabled reference solutions")
    return p


COMMANDS = {"simulate": cmd_simulate, "certify": cmd_certify, "verify": cmd_verify,
            "compare-oracle": cmd_compare_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BlowUpError, StabilityBoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
