"""Theorem bound vs pencil oracle on the built-in benchmark circuits."""

import argparse
import time

from daestruct.benchmarks import BENCHMARKS
from daestruct.mna import index_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()
    t0 = time.perf_counter()
    print(f"{'circuit':24s} {'category':20s} {'bound':6s} {'oracle':6s} agree")
    for b in BENCHMARKS:
        rep = index_bound(b.system(), tol=args.tol)
        print(f"{b.name:24s} {b.category:20s} {rep.theorem_bound:6s} "
              f"{str(rep.oracle_index):6s} {rep.agreement}")
    print(f"{len(BENCHMARKS)} circuits in {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
