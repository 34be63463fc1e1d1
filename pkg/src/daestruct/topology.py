"""Circuit graphs, reduced incidence matrices and the rank criteria for
V-loops, I-cutsets, CV-loops and LI-cutsets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBranch, NotConnected
from .linalg import null_space_basis, projector_onto_kernel, rank_svd

KINDS = ("C", "L", "R", "V", "I")


@dataclass(frozen=True)
class Branch:
    id: str
    n_from: int
    n_to: int
    kind: str
    element: str | None = None
    port: int = 0


@dataclass
class CircuitGraph:
    """Directed multigraph; node 0 is the mass (ground) node."""

    node_count: int
    branches: list[Branch] = field(default_factory=list)

    def of_kind(self, kind: str) -> list[Branch]:
        return [b for b in self.branches if b.kind == kind]

    def validate(self) -> None:
        seen = set()
        for b in self.branches:
            if b.kind not in KINDS:
                raise InvalidBranch(f"branch {b.id}: unknown class {b.kind!r}")
            if b.n_from == b.n_to:
                raise InvalidBranch(f"branch {b.id}: self-loop at node {b.n_from}")
            for n in (b.n_from, b.n_to):
                if not 0 <= n < self.node_count:
                    raise InvalidBranch(f"branch {b.id}: node {n} out of range")
            if b.id in seen:
                raise InvalidBranch(f"duplicate branch id {b.id}")
            seen.add(b.id)
        if not is_connected(self.node_count, [(b.n_from, b.n_to) for b in self.branches]):
            raise NotConnected("circuit graph is not connected")


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def is_connected(node_count: int, edges) -> bool:
    ds = _DisjointSet(node_count)
    for a, b in edges:
        ds.union(a, b)
    return len({ds.find(i) for i in range(node_count)}) <= 1


@dataclass
class IncidenceSet:
    A_C: np.ndarray
    A_L: np.ndarray
    A_R: np.ndarray
    A_V: np.ndarray
    A_I: np.ndarray
    ids: dict[str, list[str]]

    def __getitem__(self, kind: str) -> np.ndarray:
        return getattr(self, f"A_{kind}")

    @property
    def rows(self) -> int:
        return self.A_C.shape[0]

    def stack(self, kinds: str) -> np.ndarray:
        return np.hstack([self[k] for k in kinds])


def build_incidence(g: CircuitGraph) -> IncidenceSet:
    """Reduced incidence matrices, mass-node row deleted, declaration order."""
    g.validate()
    rows = g.node_count - 1
    mats, ids = {}, {}
    for kind in KINDS:
        brs = g.of_kind(kind)
        A = np.zeros((rows, len(brs)))
        for j, b in enumerate(brs):
            if b.n_from > 0:
                A[b.n_from - 1, j] = 1.0
            if b.n_to > 0:
                A[b.n_to - 1, j] = -1.0
        mats[f"A_{kind}"] = A
        ids[kind] = [b.id for b in brs]
    return IncidenceSet(ids=ids, **mats)


def _full_column_rank(M, tol):
    return M.shape[1] == 0 or rank_svd(M, tol) == M.shape[1]


def _full_row_rank(M, tol):
    return M.shape[0] == 0 or (M.shape[1] > 0 and rank_svd(M, tol) == M.shape[0])


def check_source_sanity(inc: IncidenceSet, tol: float | None = None) -> tuple[bool, bool]:
    """``(no_v_loops, no_i_cutsets)``."""
    return (_full_column_rank(inc.A_V, tol),
            _full_row_rank(inc.stack("CLRV"), tol))


def detect_cv_loops(inc: IncidenceSet, tol: float | None = None) -> bool:
    return not _full_column_rank(inc.stack("CV"), tol)


def detect_li_cutsets(inc: IncidenceSet, tol: float | None = None) -> bool:
    return not _full_row_rank(inc.stack("CRV"), tol)


def _support_tol(tol):
    return 1e-10 if tol is None else max(tol, 1e-14)


def branch_membership(inc: IncidenceSet, tol: float | None = None):
    """Branches lying in some CV-loop / LI-cutset, read off kernel supports.

    Returns ``(cv_ids, li_ids, witnesses)``. A C/V branch is a CV-loop member iff
    its coordinate is nonzero in some vector of ``ker [A_C A_V]``; an L/I branch
    is an LI-cutset member iff its row of ``[A_L A_I]^T Q`` is nonzero, with
    ``Q`` the projector onto ``ker [A_C A_R A_V]^T``.
    """
    stol = _support_tol(tol)
    cv_ids_all = inc.ids["C"] + inc.ids["V"]
    K = null_space_basis(inc.stack("CV"), tol)
    if K.size:
        support = np.abs(K).max(axis=1) > stol
        cv = {bid for bid, s in zip(cv_ids_all, support) if s}
    else:
        cv = set()

    li_ids_all = inc.ids["L"] + inc.ids["I"]
    Q = projector_onto_kernel(inc.stack("CRV").T, tol).matrix
    if Q.size and inc.stack("LI").shape[1]:
        rowsW = inc.stack("LI").T @ Q
        support = np.abs(rowsW).max(axis=1) > stol
        li = {bid for bid, s in zip(li_ids_all, support) if s}
    else:
        rowsW = np.zeros((len(li_ids_all), inc.rows))
        li = set()
    return cv, li, {"cv_kernel": K, "li_rows": rowsW}


@dataclass
class TopologyReport:
    has_v_loop: bool
    has_i_cutset: bool
    has_cv_loop: bool
    has_li_cutset: bool
    cv_loop_branches: set[str]
    li_cutset_branches: set[str]
    witnesses: dict

    def to_dict(self) -> dict:
        return {
            "has_v_loop": self.has_v_loop,
            "has_i_cutset": self.has_i_cutset,
            "has_cv_loop": self.has_cv_loop,
            "has_li_cutset": self.has_li_cutset,
            "cv_loop_branches": sorted(self.cv_loop_branches),
            "li_cutset_branches": sorted(self.li_cutset_branches),
        }


def analyze(inc: IncidenceSet, tol: float | None = None) -> TopologyReport:
    no_v, no_i = check_source_sanity(inc, tol)
    cv, li, wit = branch_membership(inc, tol)
    return TopologyReport(
        has_v_loop=not no_v,
        has_i_cutset=not no_i,
        has_cv_loop=detect_cv_loops(inc, tol),
        has_li_cutset=detect_li_cutsets(inc, tol),
        cv_loop_branches=cv,
        li_cutset_branches=li,
        witnesses=wit,
    )
