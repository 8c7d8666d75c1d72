"""Grid refinement study of the canonical pulse: Richardson order and defect orders."""

import argparse

from nordfluid.cli import parse_config
from nordfluid.field import Grid
from nordfluid.solver import (
    PulseSpec, entropy_defect, integrate_nonlinear, observed_order, pulse_data, richardson_order,
)
from nordfluid.state import background_solve


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, nargs=3, default=[256, 512, 1024])
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--dissipation", type=float, default=0.01)
    args = ap.parse_args()
    cfg = parse_config({"solver": {"T": args.T, "dissipation": args.dissipation}})
    bg = background_solve(cfg.eos, **{k: cfg.background[k] for k in ("kappa", "S_bar", "p_bar")})
    trajs, ent, con = [], [], []
    for n in args.points:
        grid = Grid(1, n, cfg.grid.extent)
        tr = integrate_nonlinear(pulse_data(grid, bg, PulseSpec()), cfg.solver)
        trajs.append(tr)
        ent.append(entropy_defect(tr))
        con.append(max(tr.diagnostics["constraint_defect"]))
        print(f"points={n:5d} dt={tr.diagnostics['dt']:.5g} entropy_defect={ent[-1]:.4e} "
              f"constraint_defect={con[-1]:.4e}")
    print(f"richardson order      {richardson_order(*trajs):.4f}")
    for i in range(2):
        print(f"entropy order {i}       {observed_order(ent[i], ent[i + 1]):.4f}")
        print(f"constraint order {i}    {observed_order(con[i], con[i + 1]):.4f}")


if __name__ == "__main__":
    main()
