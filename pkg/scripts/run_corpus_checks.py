"""Identity residual over grid refinement and the quartic inequality over a random corpus.

    python3 scripts/run_corpus_checks.py --count 200
"""
import argparse

import numpy as np

from cns2d import Grid
from cns2d.corpus import positive_corpus, www_corpus
from cns2d.diagnostics import check_inequality_ww7, residual_identity_www


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    print("field,res_N128,res_N256,res_N512")
    for i, f in enumerate(www_corpus(a.seed)):
        res = [residual_identity_www(Grid(n), np.exp(f.sample(Grid(n)))) for n in (128, 256, 512)]
        print(f"{i}," + ",".join(f"{r:.3e}" for r in res))

    g = Grid(128)
    ratios = np.array([check_inequality_ww7(g, c).ratio
                       for c in positive_corpus(g, a.seed, a.count)])
    print(f"quartic/hessian_log over {a.count} fields: min {ratios.min():.4g} "
          f"median {np.median(ratios):.4g} max {ratios.max():.4g} (bound 25)")


if __name__ == "__main__":
    main()
