"""Manufactured-solution order study for both schemes and all kinds.

    python3 scripts/run_mms.py --n-points 32 --dt 0.02 --levels 4
"""
import argparse

from cns2d import Grid, IntegratorConfig
from cns2d.convergence import mms_run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-points", type=int, default=32)
    ap.add_argument("--dt", type=float, default=0.02)
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--levels", type=int, default=4)
    a = ap.parse_args()

    grid = Grid(a.n_points)
    print("scheme,kind,order,errors,spatial")
    for scheme in ("if_rk2", "if_euler"):
        for kind in ("unsteady", "steady", "uniform"):
            fit = mms_run(grid, IntegratorConfig(dt=a.dt, t_end=a.t_end, scheme=scheme),
                          kind=kind, levels=a.levels)
            errs = " ".join(f"{e:.3e}" for e in fit.extra["errors"])
            print(f"{scheme},{kind},{fit.slope:.4f},{errs},{fit.extra['spatial'][0]:.2e}")


if __name__ == "__main__":
    main()
