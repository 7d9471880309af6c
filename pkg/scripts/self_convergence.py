"""Temporal self-convergence of the full delayed scheme.

Runs a preset at dt, dt/2, dt/4 (n_tau doubled each time so tau is fixed) and
prints the error ratio of successive differences; second order gives ~4.
"""

import argparse

import numpy as np

from kdvb_delay.config import load_preset
from kdvb_delay.solver import run, run_with_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("preset", nargs="?", default="preset-B")
    ap.add_argument("--dt", type=float, default=2.5e-3)
    ap.add_argument("--t-end", type=float, default=1.0)
    args = ap.parse_args()

    cfg = load_preset(args.preset)
    finals, residuals = [], []
    for k in range(4):
        c = cfg.with_time(args.dt / 2 ** k, args.t_end)
        finals.append(run_with_state(c.solver_config())[0].u)
        residuals.append(np.max(np.abs(run(c.solver_config()).identity_residual_series)))
    for k in range(2):
        r = np.linalg.norm(finals[k] - finals[k + 1]) / np.linalg.norm(finals[k + 1] - finals[k + 2])
        print(f"dt {args.dt / 2 ** k:.3e}: solution difference ratio {r:.3f}")
    for k in range(3):
        print(f"dt {args.dt / 2 ** k:.3e}: max identity residual {residuals[k]:.3e}, "
              f"ratio {residuals[k] / residuals[k + 1]:.3f}")


if __name__ == "__main__":
    main()
