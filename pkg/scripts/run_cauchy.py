"""Cauchy-in-k sweep: truncated runs at several k against a fine reference.

    python3 scripts/run_cauchy.py --n-points 128 --ks 4 8 16 32 --reference 128
"""
import argparse
import time

from cns2d import Grid, IntegratorConfig, SystemParams, initial_data
from cns2d.convergence import SweepSpec, cauchy_k_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-points", type=int, default=128)
    ap.add_argument("--ks", type=float, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--reference", type=float, default=128)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--mode", choices=("annulus", "lowpass"), default="annulus")
    ap.add_argument("--dt", type=float, default=0.005)
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--workers", type=int, default=1)
    a = ap.parse_args()

    grid = Grid(a.n_points)
    spec = SweepSpec("k", a.ks, SystemParams("truncated", eps=a.eps, k_trunc=a.reference),
                     IntegratorConfig(dt=a.dt, t_end=a.t_end, sample_every=10),
                     initial_data("gaussian_bump", grid), workers=a.workers)
    t0 = time.perf_counter()
    fit = cauchy_k_experiment(a.ks, a.reference, spec, mode=a.mode)
    print("k,error_H1,raw")
    for (k, e), raw in zip(fit.pairs, fit.extra.get("raw", [])):
        print(f"{k:g},{e:.6e},{raw:.6e}")
    print(f"slope={fit.slope:.4f} r_squared={fit.r_squared:.4f} "
          f"({time.perf_counter() - t0:.1f}s){' FAILED: ' + fit.message if fit.failed else ''}")


if __name__ == "__main__":
    main()
