"""Constructive reduction of a linear MNA system to an explicit ODE.

Every unknown derivative is written as an affine expression

    z' = Mz @ z + sum_k Ms[k] @ s^(k)(t)        (k = 0..3)

following the projector chain: potentials are split with ``Q_CV`` (onto
``ker [A_C A_V]^T``), the complement is read off the capacitor and source
rows, the ``Q_CV`` part is fixed by the resistive rows, and the part hidden in
LI-cutsets (``Q_CV Q_R-CV``) by the twice differentiated cutset law. Loop
currents of CV-loops come from the differentiated loop constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elements import classify
from .errors import ReductionUnavailable
from .linalg import null_space_basis, projector_onto_kernel, range_basis
from .mna import MnaSystem, index_bound

N_ORDERS = 4


class Aff:
    """Affine map ``z, s, s', s'', s''' -> Mz z + sum_k Ms[k] s^(k)``."""

    # make ``ndarray @ Aff`` dispatch to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, Mz, Ms):
        self.Mz = np.asarray(Mz, float)
        self.Ms = [np.asarray(m, float) for m in Ms]

    @classmethod
    def zeros(cls, rows, nz, ns):
        return cls(np.zeros((rows, nz)), [np.zeros((rows, ns)) for _ in range(N_ORDERS)])

    @classmethod
    def select(cls, sl: slice, nz, ns):
        Mz = np.eye(nz)[sl]
        return cls(Mz, [np.zeros((Mz.shape[0], ns)) for _ in range(N_ORDERS)])

    @classmethod
    def source(cls, S, order, nz):
        S = np.asarray(S, float)
        Ms = [np.zeros_like(S) for _ in range(N_ORDERS)]
        Ms[order] = S
        return cls(np.zeros((S.shape[0], nz)), Ms)

    @property
    def rows(self):
        return self.Mz.shape[0]

    def __add__(self, o):
        return Aff(self.Mz + o.Mz, [a + b for a, b in zip(self.Ms, o.Ms)])

    def __sub__(self, o):
        return self + (-o)

    def __neg__(self):
        return Aff(-self.Mz, [-m for m in self.Ms])

    def __rmatmul__(self, M):
        M = np.asarray(M, float)
        return Aff(M @ self.Mz, [M @ m for m in self.Ms])


@dataclass
class ExplicitODE:
    names: list[str]
    Mz: np.ndarray
    Ms: list[np.ndarray]
    source: object  # callable (t, order) -> s^(order)(t)
    trace: list[str] = field(default_factory=list)
    projectors: dict = field(default_factory=dict)

    @property
    def E(self):
        return np.eye(self.Mz.shape[0])

    @property
    def A(self):
        return -self.Mz

    def forcing(self, t: float, order: int = 0) -> np.ndarray:
        if order:
            raise NotImplementedError("ODE forcing derivatives are not needed")
        return sum(M @ self.source(t, k) for k, M in enumerate(self.Ms))

    def rhs(self, z, t: float) -> np.ndarray:
        return self.Mz @ np.asarray(z, float) + self.forcing(t)


def _class_maps(sys: MnaSystem, kind: str, reports):
    """Global per-class matrices from the element reductions.

    Returns dict with blocks (all acting on the class-level vectors):
    ``dx, dd, dup, du`` (derivative of the dependent port quantity) and
    ``xx, xd, xup, xu`` (derivative of the internal states).
    """
    nb = sys.inc[kind].shape[1]
    xs = sys.slices[f"x_{kind}"]
    nxc = xs.stop - xs.start
    out = {k: np.zeros((nb, nxc if k == "dx" else nb)) for k in ("dx", "dd", "dup", "du")}
    out.update({k: np.zeros((nxc, nxc if k == "xx" else nb)) for k in ("xx", "xd", "xup", "xu")})
    for be in sys.elements:
        if be.kind != kind:
            continue
        red = reports[be.name].reduction
        xl = np.arange(be.x_cols.start - xs.start, be.x_cols.stop - xs.start)
        pp = np.asarray(be.branch_pos)
        nx = red.n_x
        Ww, Wup, Wu = red.Ww, red.Wup, red.Wu
        X, D = slice(0, nx), slice(nx, None)
        out["dx"][np.ix_(pp, xl)] = Ww[D, X]
        out["dd"][np.ix_(pp, pp)] = Ww[D, D]
        out["dup"][np.ix_(pp, pp)] = Wup[D]
        out["du"][np.ix_(pp, pp)] = Wu[D]
        out["xx"][np.ix_(xl, xl)] = Ww[X, X]
        out["xd"][np.ix_(xl, pp)] = Ww[X, D]
        out["xup"][np.ix_(xl, pp)] = Wup[X]
        out["xu"][np.ix_(xl, pp)] = Wu[X]
    return out


def _solve_sym(M, rhs: Aff, what) -> Aff:
    if M.shape[0] == 0:
        return Aff.zeros(0, rhs.Mz.shape[1], rhs.Ms[0].shape[1])
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        raise ReductionUnavailable(f"{what}: projected system is singular") from None
    if np.linalg.cond(M) > 1e12:
        raise ReductionUnavailable(f"{what}: projected system is ill-conditioned")
    return Minv @ rhs


def reduce_to_ode(sys: MnaSystem, tol: float | None = None) -> ExplicitODE:
    """Explicit ODE for all unknowns of a linear circuit covered by the theorems."""
    if not sys.linear:
        raise ReductionUnavailable("reduction needs a fully linear circuit")
    rep = index_bound(sys, tol, oracle=False)
    if rep.theorem_bound not in ("<=1", "<=2"):
        raise ReductionUnavailable(f"theorem hypotheses unmet: {rep.reason}")
    reports = {be.name: classify(be.binding.element, hint=be.kind, tol=tol)
               for be in sys.elements}
    inc = sys.inc
    nz, ns = sys.size, sys.n_sources
    nV = len(sys.v_ids)
    Sv = np.eye(ns)[:nV]
    Si = np.eye(ns)[nV:]
    sl = sys.slices
    z = {k: Aff.select(sl[k], nz, ns) for k in sl}
    A_C, A_R, A_V, A_L, A_I = inc.A_C, inc.A_R, inc.A_V, inc.A_L, inc.A_I
    n_e = inc.rows
    trace = []

    L = _class_maps(sys, "L", reports)
    Cm = _class_maps(sys, "C", reports)
    R = _class_maps(sys, "R", reports)

    e, iC, iR, iV, iL = z["e"], z["i_C"], z["i_R"], z["i_V"], z["i_L"]
    xC, xR, xL = z["x_C"], z["x_R"], z["x_L"]
    vL, vC, vR = A_L.T @ e, A_C.T @ e, A_R.T @ e
    i_src = lambda k: Aff.source(Si, k, nz)  # noqa: E731
    v_src = lambda k: Aff.source(Sv, k, nz)  # noqa: E731

    # derivatives that need no solve
    gL = (L["dx"] @ xL) + (L["dd"] @ iL) + (L["du"] @ vL)
    gC = (Cm["dx"] @ xC) + (Cm["dd"] @ vC) + (Cm["du"] @ iC)
    GR_rest = (R["dx"] @ xR) + (R["dd"] @ iR) + (R["du"] @ vR)
    xR_dot = (R["xx"] @ xR) + (R["xd"] @ iR) + (R["xu"] @ vR)

    # potentials: complement of Q_CV from capacitor and source rows
    ACV = np.hstack([A_C, A_V])
    Qcv = projector_onto_kernel(ACV.T, tol)
    Q_CV = Qcv.matrix
    rhs_cv = Aff(np.vstack([gC.Mz, np.zeros((nV, nz))]),
                 [np.vstack([gC.Ms[k], (v_src(1)).Ms[k]]) for k in range(N_ORDERS)])
    f1 = np.linalg.pinv(ACV.T, rcond=1e-12) @ rhs_cv if ACV.shape[1] else Aff.zeros(n_e, nz, ns)

    # Q_CV part from the resistive rows of the differentiated KCL
    Mm = A_R.T @ Q_CV
    B2 = range_basis(Mm.T, tol)
    GRvp = R["dup"]
    T = Mm @ B2
    rhs2 = -(B2.T @ ((Mm.T @ ((GRvp @ (A_R.T @ f1)) + GR_rest))
                     + (Q_CV.T @ ((A_L @ gL) + (A_I @ i_src(1))))))
    u2 = _solve_sym(T.T @ GRvp @ T, rhs2, "resistive projection")
    f2 = B2 @ u2 if B2.shape[1] else Aff.zeros(n_e, nz, ns)
    trace.append(f"Q_CV rank {int(round(np.trace(Q_CV)))}; resistive block {B2.shape[1]}")

    # part hidden in LI-cutsets: Q_hat = Q_CV Q_R-CV
    Qrcv = projector_onto_kernel(Mm, tol) if Mm.size else None
    Q_RCV = Qrcv.matrix if Qrcv is not None else np.eye(n_e)
    P_RCV = np.eye(n_e) - Q_RCV
    Qhat = Q_CV @ Q_RCV
    Bh = range_basis(Qhat, tol)
    ePart = f1 + f2
    second_stage = False
    if Bh.shape[1]:
        second_stage = True
        trace.append(f"LI-cutset stage: hidden potential block {Bh.shape[1]}")
        SL = L["dx"] @ L["xup"] + L["du"]
        Mm2 = A_L.T @ Bh
        xL_rest = (L["xx"] @ xL) + (L["xd"] @ iL) + (L["xu"] @ vL)
        known = (L["dx"] @ (xL_rest + (L["xup"] @ (A_L.T @ ePart)))) \
            + (L["dd"] @ gL) + (L["du"] @ (A_L.T @ ePart))
        rhs6 = -(Bh.T @ ((A_L @ known) + (A_I @ i_src(2))))
        u6 = _solve_sym(Mm2.T @ SL @ Mm2, rhs6, "LI-cutset projection")
        ePart = ePart + (Bh @ u6)
    e_dot = ePart
    iR_dot = (GRvp @ (A_R.T @ e_dot)) + GR_rest
    iL_dot = gL
    xL_dot = (L["xup"] @ (A_L.T @ e_dot)) + (L["xx"] @ xL) + (L["xd"] @ iL) + (L["xu"] @ vL)

    # currents of capacitors and voltage sources from the differentiated KCL
    kcl = -((A_R @ iR_dot) + (A_L @ iL_dot) + (A_I @ i_src(1)))
    f8 = np.linalg.pinv(ACV, rcond=1e-12) @ kcl if ACV.shape[1] else Aff.zeros(0, nz, ns)
    nC = A_C.shape[1]
    Qt = null_space_basis(ACV, tol) if ACV.shape[1] else np.zeros((0, 0))
    cur = f8
    if Qt.size:
        second_stage = True
        trace.append(f"CV-loop stage: loop current block {Qt.shape[1]}")
        M3 = Qt[:nC]
        M3V = Qt[nC:]
        SC = Cm["dx"] @ Cm["xup"] + Cm["du"]
        xC_rest = (Cm["xx"] @ xC) + (Cm["xd"] @ vC) + (Cm["xu"] @ iC)
        iC8 = np.eye(nC + nV)[:nC] @ f8
        known = (SC @ iC8) + (Cm["dx"] @ xC_rest) + (Cm["dd"] @ (A_C.T @ e_dot))
        rhs9 = -((M3.T @ known) + (M3V.T @ v_src(2)))
        w = _solve_sym(M3.T @ SC @ M3, rhs9, "CV-loop projection")
        cur = f8 + (Qt @ w)
    iC_dot = np.eye(nC + nV)[:nC] @ cur if ACV.shape[1] else Aff.zeros(0, nz, ns)
    iV_dot = np.eye(nC + nV)[nC:] @ cur if ACV.shape[1] else Aff.zeros(0, nz, ns)
    xC_dot = (Cm["xup"] @ iC_dot) + (Cm["xx"] @ xC) + (Cm["xd"] @ vC) + (Cm["xu"] @ iC)
    trace.append("second differentiation stage taken" if second_stage
                 else "first differentiation stage suffices")

    parts = {"e": e_dot, "i_C": iC_dot, "i_R": iR_dot, "i_V": iV_dot, "i_L": iL_dot,
             "x_C": xC_dot, "x_R": xR_dot, "x_L": xL_dot}
    Mz = np.zeros((nz, nz))
    Ms = [np.zeros((nz, ns)) for _ in range(N_ORDERS)]
    for k, aff in parts.items():
        if aff.rows:
            Mz[sl[k]] = aff.Mz
            for o in range(N_ORDERS):
                Ms[o][sl[k]] = aff.Ms[o]
    projectors = {"Q_CV": Q_CV, "P_CV": np.eye(n_e) - Q_CV, "Q_R-CV": Q_RCV,
                  "P_R-CV": P_RCV, "Q_hat": Qhat}
    return ExplicitODE(list(sys.names), Mz, Ms, sys.source_vector, trace, projectors)
