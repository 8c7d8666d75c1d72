"""Picard iteration on the canonical pulse: selected T, eps0, decay ratios and tube norms."""

import argparse

from nordfluid.cli import _setup, parse_config
from nordfluid.solver import picard_select_T


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m-max", type=int, default=6)
    ap.add_argument("--eps0", type=float, default=None, help="fixed mollifier scale (default: auto)")
    args = ap.parse_args()
    cfg = parse_config({})
    _, bg, box, data = _setup(cfg)
    res = picard_select_T(data, cfg.solver, args.m_max, args.eps0, bg.V_bar, box)
    print(f"T = {res.T:g}  eps0 = {res.eps[0]:g}  Lambda = {res.Lambda:.6g}")
    for m, (d, tube) in enumerate(zip(res.differences, res.tube_norms[1:]), start=1):
        ratio = res.ratios[m - 2] if m > 1 else float("nan")
        print(f"m={m}  sup-diff={d:.4e}  ratio={ratio:8.3f}  tube={tube:.4e}")


if __name__ == "__main__":
    main()
