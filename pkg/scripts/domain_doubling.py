"""Box-size check: rerun a preset with L and N doubled and compare decay rates.

The box [-L, L) truncates the real line. Keep doubling L until the fitted
decay rate changes by less than 1%.
"""

import argparse
from dataclasses import replace

from kdvb_delay.config import load_preset
from kdvb_delay.diagnostics import decay_report
from kdvb_delay.solver import run


def fitted_rate(cfg, gamma):
    return decay_report(run(cfg.solver_config(record_stride=10)), gamma).fitted_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("preset", nargs="?", default="preset-A")
    ap.add_argument("--doublings", type=int, default=1)
    ap.add_argument("--gamma", type=float, default=0.3, help="rate used only to size the fit window")
    args = ap.parse_args()

    cfg = load_preset(args.preset)
    prev = fitted_rate(cfg, args.gamma)
    print(f"L = {cfg.L:g}, N = {cfg.N}: fitted rate {prev:.6f}")
    for _ in range(args.doublings):
        cfg = replace(cfg, L=2 * cfg.L, N=2 * cfg.N)
        rate = fitted_rate(cfg, args.gamma)
        change = abs(rate - prev) / abs(prev)
        print(f"L = {cfg.L:g}, N = {cfg.N}: fitted rate {rate:.6f}, relative change {change:.2e}"
              f" ({'converged' if change < 0.01 else 'not converged'})")
        prev = rate


if __name__ == "__main__":
    main()
