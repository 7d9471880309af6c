"""Simulate and certify every shipped preset; artifacts land in runs/<preset>/."""

import argparse
import sys

from kdvb_delay.cli import main as cli_main
from kdvb_delay.config import PRESET_NAMES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs")
    ap.add_argument("presets", nargs="*", default=list(PRESET_NAMES))
    args = ap.parse_args()
    status = 0
    for name in args.presets:
        rc = cli_main(["simulate", "--preset", name, "--out", f"{args.out}/{name}"])
        status = max(status, rc)
    return status


if __name__ == "__main__":
    sys.exit(main())
