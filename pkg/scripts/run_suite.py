"""Run every scenario at the default desk configuration and print the checks."""

import argparse
import sys

from nordfluid.cli import parse_config, run_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="nordfluid-out")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    bundle = run_scenario(parse_config({}, args.out, args.seed))
    for c in bundle.checks:
        print(c.line())
    print(f"{sum(c.passed for c in bundle.checks)}/{len(bundle.checks)} checks passed")
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
