"""Build the three refined field devices and print their classifications."""

import argparse

import numpy as np

from daestruct import fit
from daestruct.elements import classify


def em(n):
    g = fit.StaggeredGrid((n, n, n))
    terms = [fit.face_terminal(g, "x-"), fit.face_terminal(g, "x+")]
    return fit.build_em_device(g, fit.MaterialField(sigma=1.0), terms)


def eqs(n):
    g = fit.StaggeredGrid((n, n, 1))
    bc = fit.BoundarySpec({f: ("dirichlet" if f == "x-" else "neumann") for f in fit.FACES})
    return fit.build_eqs_device(g, fit.MaterialField(sigma=0.5), [fit.face_terminal(g, "x+", bc)],
                                bc=bc)


def mqs(n):
    g = fit.StaggeredGrid((n, 3, 1))
    tau = np.zeros(g.cells)
    tau[1, 1, 0] = tau[n - 2, 1, 0] = 1.0
    coils = [(((1, 1), (1, 1), (0, 0)), "z", 1.0), (((n - 2, n - 2), (1, 1), (0, 0)), "z", -1.0)]
    return fit.build_mqs_device(g, fit.MaterialField(tau_eq=tau), coils=coils)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4, help="cells per refined direction")
    args = ap.parse_args()
    for name, build in (("em", em), ("eqs", eqs), ("mqs", mqs)):
        b = build(args.n)
        rep = classify(b.element)
        checks = ", ".join(f"{k}={v:.3g}" for k, v in sorted(b.checks.items())
                           if isinstance(v, (int, float)))
        print(f"{name}: n_x={b.element.n_x} n_p={b.element.n_p} {rep.element_class} "
              f"strong={rep.strong} margin={rep.margin:.3g}")
        print(f"    {checks}")


if __name__ == "__main__":
    main()
