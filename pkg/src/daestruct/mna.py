"""Generalized modified nodal analysis with retained element currents.

Unknown layout::

    z = (e, i_C, i_R, i_V, i_L, x_C, x_R, x_L)

Rows: Kirchhoff current law at every non-mass node, one row per voltage
source, then the descriptor rows of every element with its port voltages
replaced by ``A_E^T e``. For linear elements the system is the pencil
``E z' + A z = f(t)`` with ``f(t) = Fs @ s(t)``, ``s = (v_src, i_src)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elements import CLASS_NAMES, ClassificationReport, DescriptorElement, classify
from .errors import IncompleteModel, ShapeMismatch, SingularPencil, Unclassified
from .linalg import null_space_basis, pencil_index, rank_svd
from .topology import CircuitGraph, IncidenceSet, TopologyReport, analyze, build_incidence
from .waveforms import Waveform

ELEMENT_KINDS = ("C", "R", "L")
BOUND_ORDER = {"<=1": 1, "<=2": 2}


@dataclass(frozen=True)
class ElementBinding:
    """A descriptor element attached to circuit branches.

    ``strong="asserted"`` skips classification; such an element may omit its
    descriptor (nonlinear path) and then only the theorem bound is available.
    """

    element: DescriptorElement | None
    strong: str = "verify"
    n_p: int | None = None

    @property
    def ports(self) -> int:
        if self.element is not None:
            return self.element.n_p
        return self.n_p or 1


@dataclass
class BoundElement:
    name: str
    kind: str
    binding: ElementBinding
    branch_pos: list[int]  # positions inside the class block of currents
    x_cols: slice
    rows: slice


@dataclass
class MnaSystem:
    graph: CircuitGraph
    inc: IncidenceSet
    elements: list[BoundElement]
    v_ids: list[str]
    i_ids: list[str]
    waveforms: dict[str, Waveform]
    names: list[str]
    slices: dict[str, slice]
    E: np.ndarray | None
    A: np.ndarray | None
    Fs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def linear(self) -> bool:
        return self.E is not None

    @property
    def n_sources(self) -> int:
        return len(self.v_ids) + len(self.i_ids)

    def source_vector(self, t: float, order: int = 0) -> np.ndarray:
        return np.array([self.waveforms[s].derivative(t, order) for s in self.v_ids + self.i_ids])

    def forcing(self, t: float, order: int = 0) -> np.ndarray:
        return self.Fs @ self.source_vector(t, order)

    def element(self, name: str) -> BoundElement:
        for b in self.elements:
            if b.name == name:
                return b
        raise KeyError(name)


def _bind(g: CircuitGraph, inc: IncidenceSet, elements: dict) -> list[BoundElement]:
    groups: dict[str, list] = {}
    order = []
    for b in g.branches:
        if b.kind not in ELEMENT_KINDS:
            continue
        name = b.element or b.id
        if name not in elements:
            raise IncompleteModel(f"branch {b.id} is not bound to an element")
        if name not in groups:
            groups[name] = []
            order.append(name)
        groups[name].append(b)
    bound = []
    for name in order:
        brs = groups[name]
        kinds = {b.kind for b in brs}
        if len(kinds) != 1:
            raise ShapeMismatch(f"element {name} spans branches of classes {sorted(kinds)}")
        binding = elements[name]
        if not isinstance(binding, ElementBinding):
            binding = ElementBinding(binding)
        brs = sorted(brs, key=lambda b: b.port)
        if len(brs) != binding.ports:
            raise ShapeMismatch(f"element {name} has {binding.ports} ports, "
                                f"{len(brs)} branches are bound to it")
        if len(brs) > 1 and [b.port for b in brs] != list(range(1, len(brs) + 1)):
            raise ShapeMismatch(f"element {name}: ports must be numbered 1..{len(brs)}")
        el = binding.element
        if el is not None and el.forcing is not None:
            raise IncompleteModel(f"element {name}: internal forcing is not supported")
        kind = brs[0].kind
        ids = inc.ids[kind]
        bound.append(BoundElement(name, kind, binding, [ids.index(b.id) for b in brs],
                                  slice(0, 0), slice(0, 0)))
    unused = set(elements) - set(order)
    if unused:
        raise IncompleteModel(f"elements without branches: {sorted(unused)}")
    return bound


def assemble(g: CircuitGraph, elements: dict, sources: dict) -> MnaSystem:
    """Stack KCL, source and element rows into a square system."""
    inc = build_incidence(g)
    bound = _bind(g, inc, elements)
    for b in g.branches:
        if b.kind in ("V", "I") and b.id not in sources:
            raise IncompleteModel(f"source {b.id} has no waveform")
    n_e = inc.rows
    counts = {k: inc[k].shape[1] for k in "CRVL"}
    names = [f"e{k + 1}" for k in range(n_e)]
    slices = {"e": slice(0, n_e)}
    off = n_e
    for k in ("C", "R", "V", "L"):
        slices[f"i_{k}"] = slice(off, off + counts[k])
        names += [f"i_{bid}" for bid in inc.ids[k]]
        off += counts[k]
    for k in ELEMENT_KINDS:
        start = off
        for be in bound:
            if be.kind != k:
                continue
            nx = be.binding.element.n_x if be.binding.element is not None else 0
            be.x_cols = slice(off, off + nx)
            names += [f"x_{be.name}_{j + 1}" for j in range(nx)]
            off += nx
        slices[f"x_{k}"] = slice(start, off)
    n = off

    v_ids, i_ids = list(inc.ids["V"]), list(inc.ids["I"])
    ns = len(v_ids) + len(i_ids)
    Fs = np.zeros((n, ns))
    row = 0
    # KCL rows (and V rows) are written into A; element rows follow
    linear = all(be.binding.element is not None for be in bound)
    E = np.zeros((n, n))
    A = np.zeros((n, n))
    for k in ("C", "R", "V", "L"):
        A[0:n_e, slices[f"i_{k}"]] = inc[k]
    Fs[0:n_e, len(v_ids):] = -inc.A_I
    row = n_e
    A[row:row + len(v_ids), slices["e"]] = inc.A_V.T
    Fs[row:row + len(v_ids), :len(v_ids)] = np.eye(len(v_ids))
    row += len(v_ids)

    ordered = [be for k in ELEMENT_KINDS for be in bound if be.kind == k]
    for be in ordered:
        el = be.binding.element
        npt = be.binding.ports
        nr = (el.n_x if el is not None else 0) + npt
        be.rows = slice(row, row + nr)
        if el is not None:
            icols = [slices[f"i_{be.kind}"].start + p for p in be.branch_pos]
            Ab = inc[be.kind][:, be.branch_pos]
            E[be.rows, be.x_cols] += el.Kx
            A[be.rows, be.x_cols] += el.Lx
            E[be.rows, icols] += el.Ki
            A[be.rows, icols] += el.Li
            E[be.rows, slices["e"]] += el.Kv @ Ab.T
            A[be.rows, slices["e"]] += el.Lv @ Ab.T
        row += nr
    if row != n:
        raise ShapeMismatch(f"assembled {row} rows for {n} unknowns")
    sysE, sysA = (E, A) if linear else (None, None)
    for M in (sysE, sysA, Fs):
        if M is not None:
            M.setflags(write=False)
    return MnaSystem(g, inc, ordered, v_ids, i_ids, dict(sources), names, slices,
                     sysE, sysA, Fs)


@dataclass
class IndexReport:
    status: str  # "ok" | "not-covered"
    topology: TopologyReport
    element_classes: dict[str, ClassificationReport | None]
    theorem_bound: str  # "<=1" | "<=2" | "not-covered"
    hypothesis_trace: list[str]
    oracle_index: int | None = None
    agreement: bool | None = None
    reason: str | None = None
    witness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        els = {}
        for name, rep in sorted(self.element_classes.items()):
            els[name] = rep.to_dict() if rep is not None else {"class": "asserted"}
        return {
            "status": self.status,
            "reason": self.reason,
            "topology": self.topology.to_dict(),
            "elements": els,
            "theorem_bound": self.theorem_bound,
            "hypothesis_trace": list(self.hypothesis_trace),
            "oracle_index": self.oracle_index,
            "agreement": self.agreement,
            "witness": self.witness,
        }


def _assumption4_witness(inc: IncidenceSet, top: TopologyReport, tol) -> dict:
    out = {}
    if top.has_v_loop:
        K = null_space_basis(inc.A_V, tol)
        v = K[:, 0]
        out["v_loop"] = [bid for bid, c in zip(inc.ids["V"], v) if abs(c) > 1e-10]
    if top.has_i_cutset:
        K = null_space_basis(inc.stack("CLRV").T, tol)
        w = K[:, 0]
        out["i_cutset_nodes"] = [k + 1 for k, c in enumerate(w) if abs(c) > 1e-10]
    return out


def _run_oracle(sys: MnaSystem, tol, trace) -> int | None:
    if not sys.linear:
        trace.append("oracle: skipped (nonlinear or asserted element without descriptor)")
        return None
    try:
        res = pencil_index(sys.E, sys.A, tol)
    except SingularPencil as exc:
        trace.append(f"oracle: singular pencil ({exc})")
        return None
    trace.append(f"oracle: shuffle index {res.index}")
    return res.index


def index_bound(sys: MnaSystem, tol: float | None = None, oracle: bool = True) -> IndexReport:
    """Decide the structural index bound and compare with the pencil oracle."""
    inc = sys.inc
    top = analyze(inc, tol)
    trace: list[str] = []
    classes: dict[str, ClassificationReport | None] = {}

    def finish(status, bound, reason=None, witness=None):
        oi = _run_oracle(sys, tol, trace) if oracle else None
        agree = None
        if oi is not None and bound in BOUND_ORDER:
            agree = oi <= BOUND_ORDER[bound]
        return IndexReport(status, top, classes, bound, trace, oi, agree, reason, witness or {})

    if top.has_v_loop or top.has_i_cutset:
        trace.append(f"assumption 4: failed (V-loop={top.has_v_loop}, "
                     f"I-cutset={top.has_i_cutset})")
        return finish("not-covered", "not-covered", "Assumption 4 violated",
                      _assumption4_witness(inc, top, tol))
    trace.append("assumption 4: holds")

    strong = {}
    for be in sys.elements:
        if be.binding.strong == "asserted":
            classes[be.name] = None
            strong[be.name] = True
            trace.append(f"{be.name}: {CLASS_NAMES[be.kind]} strong by assertion")
            continue
        try:
            rep = classify(be.binding.element, hint=be.kind, tol=tol)
        except Unclassified as exc:
            trace.append(f"{be.name}: unclassified ({exc})")
            classes[be.name] = None
            return finish("not-covered", "not-covered", f"element {be.name} unclassified")
        classes[be.name] = rep
        strong[be.name] = rep.strong
        trace.append(f"{be.name}: {rep.element_class}, strong={rep.strong}")

    def members(ids):
        out = set()
        for be in sys.elements:
            bids = [inc.ids[be.kind][p] for p in be.branch_pos]
            if any(b in ids for b in bids):
                out.add(be.name)
        return out

    in_cv = members(top.cv_loop_branches)
    in_li = members(top.li_cutset_branches)
    weak_r = sorted(be.name for be in sys.elements if be.kind == "R" and not strong[be.name])
    trace.append(f"cv-loop present: {top.has_cv_loop}; li-cutset present: {top.has_li_cutset}")
    if weak_r:
        trace.append(f"resistance-like not strong: {weak_r}")
        return finish("not-covered", "not-covered", "resistance-like element not strong")

    if not top.has_cv_loop and not top.has_li_cutset:
        trace.append("theorem 1: all hypotheses hold")
        return finish("ok", "<=1")
    trace.append("theorem 1: not applicable")
    weak_l = sorted(n for n in in_li if sys.element(n).kind == "L" and not strong[n])
    weak_c = sorted(n for n in in_cv if sys.element(n).kind == "C" and not strong[n])
    if weak_l or weak_c:
        trace.append(f"theorem 2: failed (weak L in LI-cutsets {weak_l}, "
                     f"weak C in CV-loops {weak_c})")
        return finish("not-covered", "not-covered", "loop/cutset element not strong")
    trace.append("theorem 2: all hypotheses hold")
    return finish("ok", "<=2")


def _kept_columns(C: np.ndarray, priority) -> list[int]:
    """Greedy set of unknowns that can stay at their guess without making the
    constraints ``C z = d`` unsolvable in the remaining unknowns."""
    r = rank_svd(C) if C.size else 0
    kept: list[int] = []
    free = np.ones(C.shape[1], dtype=bool)
    for j in priority:
        free[j] = False
        if rank_svd(C[:, free]) == r:
            kept.append(j)
        else:
            free[j] = True
    return kept


def consistent_initial_values(sys, z_guess=None, t0: float = 0.0, index: int | None = None,
                              tol: float | None = None) -> np.ndarray:
    """Project ``z_guess`` onto the constraint manifold at ``t0``.

    The constraints are the row combinations of the derivative array (up to
    the index) that are free of derivatives of ``z``. Differential unknowns
    keep their guessed values whenever the constraints allow it; the
    remaining unknowns get the minimum-norm least-squares correction.
    """
    E, A = np.asarray(sys.E), np.asarray(sys.A)
    n = E.shape[0]
    z = np.zeros(n) if z_guess is None else np.asarray(z_guess, float).copy()
    if index is None:
        index = pencil_index(E, A, tol).index
    nu = int(index)
    if nu == 0:
        return z
    rows = []
    rhs = []
    for k in range(nu + 1):
        R = np.zeros((n, (nu + 2) * n))
        R[:, k * n:(k + 1) * n] = A
        R[:, (k + 1) * n:(k + 2) * n] = E
        rows.append(R)
        rhs.append(sys.forcing(t0, k))
    Mbig = np.vstack(rows)
    F = np.concatenate(rhs)
    W = null_space_basis(Mbig[:, n:].T, tol).T
    if W.size == 0:
        return z
    C = W @ Mbig[:, :n]
    d = W @ F
    differential = np.abs(E).max(axis=0) > 0
    priority = [j for j in range(n) if differential[j]]
    kept = _kept_columns(C, priority)
    free = np.setdiff1d(np.arange(n), kept)
    if free.size:
        z[free] += np.linalg.pinv(C[:, free], rcond=1e-10) @ (d - C @ z)
    return z
