"""Continuous dependence: Lipschitz ratios over perturbation scales and the interpolation exponent."""

import argparse
import tempfile
from pathlib import Path

from nordfluid.cli import parse_config, scenario_dependence


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scales", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    ap.add_argument("--N-prime", type=int, default=2)
    args = ap.parse_args()
    cfg = parse_config({"dependence": {"scales": args.scales, "N_prime": args.N_prime}})
    with tempfile.TemporaryDirectory() as tmp:
        b = scenario_dependence(cfg, Path(tmp))
        print((Path(tmp) / "dependence.csv").read_text())
    for c in b.checks:
        print(c.line())


if __name__ == "__main__":
    main()
