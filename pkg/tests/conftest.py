"""Independent oracles shared by the test modules."""

from __future__ import annotations

import numpy as np
import pytest

ACCEPTANCE: list[tuple[int, bool, str]] = []


def derivative_array_index(E, A, kmax=None, tol=1e-9):
    """Smallest ``k`` such that the derivative array of order ``k`` fixes ``z'``
    uniquely from ``z`` (the array is 1-full); no shuffle, no projectors."""
    E, A = np.asarray(E, float), np.asarray(A, float)
    n = E.shape[0]
    kmax = n + 1 if kmax is None else kmax
    for k in range(kmax + 1):
        # unknowns (z', z'', ..., z^(k+1)); row block j is the j-th derivative
        M = np.zeros(((k + 1) * n, (k + 1) * n))
        for j in range(k + 1):
            M[j * n:(j + 1) * n, j * n:(j + 1) * n] = E
            if j > 0:
                M[j * n:(j + 1) * n, (j - 1) * n:j * n] = A
        rank_full = np.linalg.matrix_rank(M, tol)
        rank_rest = np.linalg.matrix_rank(M[:, n:], tol) if k > 0 else 0
        if rank_full - rank_rest == n:
            return k
    return None


class UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            a = self.p[a]
        return a

    def union(self, a, b):
        self.p[self.find(a)] = self.find(b)


def connected(n, edges, a, b):
    uf = UnionFind(n)
    for x, y in edges:
        uf.union(x, y)
    return uf.find(a) == uf.find(b)


def cv_loop_members_graph(g):
    """Branch in a CV-loop iff its ends connect through the other C/V branches."""
    cv = [b for b in g.branches if b.kind in "CV"]
    out = set()
    for b in cv:
        rest = [(o.n_from, o.n_to) for o in cv if o.id != b.id]
        if connected(g.node_count, rest, b.n_from, b.n_to):
            out.add(b.id)
    return out


def li_cutset_members_graph(g):
    """L/I branch in an LI-cutset iff its ends are separated by removing all L/I."""
    rest = [(o.n_from, o.n_to) for o in g.branches if o.kind in "CRV"]
    return {b.id for b in g.branches if b.kind in "LI"
            and not connected(g.node_count, rest, b.n_from, b.n_to)}


@pytest.fixture
def acceptance_log():
    def log(n, ok, detail):
        ACCEPTANCE.append((n, ok, detail))
    return log


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
