"""Empirical perturbation exponents: index-1 vs index-2 benchmark circuits."""

import argparse

from daestruct.benchmarks import by_name
from daestruct.sim import perturbation_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("circuits", nargs="*", default=["series_rlc", "c_parallel_v", "l_series_i"])
    ap.add_argument("--t-end", type=float, default=0.2)
    ap.add_argument("--h", type=float, default=2e-5)
    args = ap.parse_args()
    for name in args.circuits:
        b = by_name(name)
        src = next(line[0] for line in b.lines if line[3] in "VI")
        r = perturbation_probe(b.system(), src, t_end=args.t_end, h=args.h)
        top = sorted(((p, k) for k, p in r.exponents.items() if p is not None), reverse=True)[:3]
        shown = ", ".join(f"{k}={p:.2f}" for p, k in top)
        print(f"{name} (oracle {b.expected_oracle}): max exponent {r.max_exponent:.2f} "
              f"[{r.label}]; {shown}")


if __name__ == "__main__":
    main()
