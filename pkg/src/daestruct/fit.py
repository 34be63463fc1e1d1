"""Finite integration technique on small uniform Cartesian grids.

Primal points, edges, facets and volumes are enumerated axis by axis. The
discrete operators are integer incidence matrices:

* ``G`` (edges x points), ``C`` (facets x edges), ``S`` (volumes x facets),
* dual operators ``C~ = C^T`` and ``S~ = -G^T``.

Homogeneous Dirichlet conditions remove boundary points (potential) and edges
lying inside Dirichlet faces (tangential vector potential). Terminal points of
a device are kept; they carry the port voltage.

Three devices are emitted as :class:`DescriptorElement`:

* :func:`build_em_device` -- full-wave A-phi formulation with grad-type Lorenz
  gauge, coupled through boundary terminals (inductance-like);
* :func:`build_eqs_device` -- electroquasistatic potential problem
  (capacitance-like);
* :func:`build_mqs_device` -- eddy-current A* formulation with cable
  magnetisation and winding function (resistance-like).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import DescriptorElement
from .errors import (AssumptionViolated, BuildError, DegenerateDevice, GaugeError,
                     InvalidMaterial, ShapeMismatch)
from .linalg import is_positive_definite, projector_onto_kernel, rank_svd

AXES = "xyz"
FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
MAX_CELLS = 12 ** 3


@dataclass(frozen=True)
class StaggeredGrid:
    cells: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.cells) != 3 or min(self.cells) < 1:
            raise ShapeMismatch(f"need three positive cell counts, got {self.cells}")
        if min(self.spacing) <= 0:
            raise ShapeMismatch("spacing must be positive")

    @property
    def npts(self):
        return tuple(n + 1 for n in self.cells)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.npts))

    def edge_shape(self, d):
        return tuple(self.cells[a] if a == d else self.npts[a] for a in range(3))

    def face_shape(self, d):
        return tuple(self.npts[a] if a == d else self.cells[a] for a in range(3))

    @property
    def n_edges(self) -> int:
        return sum(int(np.prod(self.edge_shape(d))) for d in range(3))

    @property
    def n_faces(self) -> int:
        return sum(int(np.prod(self.face_shape(d))) for d in range(3))

    @property
    def n_volumes(self) -> int:
        return int(np.prod(self.cells))

    def _offsets(self, shape_fn):
        off, out = 0, []
        for d in range(3):
            out.append(off)
            off += int(np.prod(shape_fn(d)))
        return out

    # index helpers, Fortran ordering (x fastest)
    def point(self, i, j, k) -> int:
        return int(np.ravel_multi_index((i, j, k), self.npts, order="F"))

    def edge(self, d, i, j, k) -> int:
        return self._offsets(self.edge_shape)[d] + int(
            np.ravel_multi_index((i, j, k), self.edge_shape(d), order="F"))

    def face(self, d, i, j, k) -> int:
        return self._offsets(self.face_shape)[d] + int(
            np.ravel_multi_index((i, j, k), self.face_shape(d), order="F"))

    def volume(self, i, j, k) -> int:
        return int(np.ravel_multi_index((i, j, k), self.cells, order="F"))

    def edges_of(self, d):
        """Yield ``(index, base point)`` for every edge along axis ``d``."""
        for idx in np.ndindex(*self.edge_shape(d)[::-1]):
            p = idx[::-1]
            yield self.edge(d, *p), p

    def faces_of(self, d):
        for idx in np.ndindex(*self.face_shape(d)[::-1]):
            p = idx[::-1]
            yield self.face(d, *p), p

    def points(self):
        for idx in np.ndindex(*self.npts[::-1]):
            p = idx[::-1]
            yield self.point(*p), p

    def volumes(self):
        for idx in np.ndindex(*self.cells[::-1]):
            p = idx[::-1]
            yield self.volume(*p), p


def _unit(a):
    e = [0, 0, 0]
    e[a] = 1
    return e


def _add(p, *vs):
    q = list(p)
    for v in vs:
        q = [a + b for a, b in zip(q, v)]
    return tuple(q)


def full_operators(grid: StaggeredGrid):
    """Unreduced integer ``G``, ``C``, ``S`` as sparse CSR matrices."""
    rows, cols, vals = [], [], []
    for d in range(3):
        for e, p in grid.edges_of(d):
            rows += [e, e]
            cols += [grid.point(*_add(p, _unit(d))), grid.point(*p)]
            vals += [1, -1]
    G = sp.csr_matrix((vals, (rows, cols)), shape=(grid.n_edges, grid.n_points), dtype=np.int64)

    rows, cols, vals = [], [], []
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        eb, ec = _unit(b), _unit(c)
        for f, p in grid.faces_of(a):
            loop = ((b, p, 1), (c, _add(p, eb), 1), (b, _add(p, ec), -1), (c, p, -1))
            for axis, q, s in loop:
                rows.append(f)
                cols.append(grid.edge(axis, *q))
                vals.append(s)
    C = sp.csr_matrix((vals, (rows, cols)), shape=(grid.n_faces, grid.n_edges), dtype=np.int64)

    rows, cols, vals = [], [], []
    for v, p in grid.volumes():
        for a in range(3):
            rows += [v, v]
            cols += [grid.face(a, *_add(p, _unit(a))), grid.face(a, *p)]
            vals += [1, -1]
    S = sp.csr_matrix((vals, (rows, cols)), shape=(grid.n_volumes, grid.n_faces), dtype=np.int64)
    return G, C, S


@dataclass(frozen=True)
class BoundarySpec:
    """Per-face boundary type (``"dirichlet"`` or ``"neumann"``) plus terminals.

    ``terminals`` is a tuple of point-index tuples, one per port; terminal
    points are excluded from the Dirichlet set.
    """

    faces: dict = field(default_factory=lambda: {f: "dirichlet" for f in FACES})
    terminals: tuple = ()

    def is_dirichlet(self, face: str) -> bool:
        return self.faces.get(face, "dirichlet") == "dirichlet"


def _on_face(grid, p, face):
    a = AXES.index(face[0])
    return p[a] == (0 if face[1] == "-" else grid.cells[a])


def face_terminal(grid: StaggeredGrid, face: str, bc: BoundarySpec | None = None) -> tuple:
    """Points of ``face`` that do not touch any other Dirichlet face."""
    bc = bc or BoundarySpec()
    others = [f for f in FACES if f != face and bc.is_dirichlet(f)]
    return tuple(idx for idx, p in grid.points()
                 if _on_face(grid, p, face) and not any(_on_face(grid, p, o) for o in others))


def box_points(grid: StaggeredGrid, box) -> tuple:
    (i0, i1), (j0, j1), (k0, k1) = box
    return tuple(grid.point(i, j, k) for k in range(k0, k1 + 1)
                 for j in range(j0, j1 + 1) for i in range(i0, i1 + 1))


@dataclass
class GridOperators:
    grid: StaggeredGrid
    G: np.ndarray  # free edges x free points
    C: np.ndarray  # faces x free edges
    S: np.ndarray  # volumes x faces
    free_points: np.ndarray
    free_edges: np.ndarray
    terminals: tuple

    @property
    def C_dual(self):
        return self.C.T

    @property
    def S_dual(self):
        return -self.G.T

    def identities(self) -> dict:
        """Max-abs residuals of the exact integer identities."""
        return {
            "CG": int(np.abs(self.C @ self.G).max(initial=0)),
            "SC": int(np.abs(self.S @ self.C).max(initial=0)),
            "C_dual_minus_CT": int(np.abs(self.C_dual - self.C.T).max(initial=0)),
            "G_plus_S_dualT": int(np.abs(self.G + self.S_dual.T).max(initial=0)),
        }


def dirichlet_sets(grid: StaggeredGrid, bc: BoundarySpec):
    term = {p for t in bc.terminals for p in t}
    dir_faces = [f for f in FACES if bc.is_dirichlet(f)]
    dpts = {idx for idx, p in grid.points()
            if idx not in term and any(_on_face(grid, p, f) for f in dir_faces)}
    dedges = set()
    for d in range(3):
        for e, p in grid.edges_of(d):
            for f in dir_faces:
                a = AXES.index(f[0])
                if a != d and _on_face(grid, p, f):
                    dedges.add(e)
                    break
    return dpts, dedges


def build_grid_operators(grid: StaggeredGrid, bc: BoundarySpec | None = None,
                         max_cells: int = MAX_CELLS) -> GridOperators:
    """Dirichlet-reduced integer operators; ``G`` has full column rank."""
    bc = bc or BoundarySpec()
    if grid.n_volumes > max_cells:
        raise BuildError(f"grid has {grid.n_volumes} cells, cap is {max_cells}")
    dpts, dedges = dirichlet_sets(grid, bc)
    if not dpts:
        raise GaugeError("empty Dirichlet set: gradient is rank deficient")
    Gf, Cf, Sf = full_operators(grid)
    fp = np.array(sorted(set(range(grid.n_points)) - dpts), dtype=int)
    fe = np.array(sorted(set(range(grid.n_edges)) - dedges), dtype=int)
    G = Gf[fe][:, fp].toarray()
    C = Cf[:, fe].toarray()
    S = Sf.toarray()
    if G.shape[1] and rank_svd(G.astype(float)) < G.shape[1]:
        raise GaugeError("gradient does not have full column rank")
    return GridOperators(grid, G, C, S, fp, fe, tuple(tuple(t) for t in bc.terminals))


@dataclass(frozen=True)
class MaterialField:
    """Isotropic per-cell coefficients; scalars broadcast to every cell."""

    eps: object = 1.0
    sigma: object = 0.0
    nu: object = 1.0
    zeta: object = 1.0
    xi: object = 1.0
    tau_eq: object = 0.0

    def cellwise(self, grid: StaggeredGrid, name: str) -> np.ndarray:
        a = np.asarray(getattr(self, name), dtype=float)
        if a.ndim == 0:
            a = np.full(grid.cells, float(a))
        elif a.size == grid.n_volumes and a.shape != tuple(grid.cells):
            a = a.reshape(grid.cells, order="F")
        if a.shape != tuple(grid.cells):
            raise ShapeMismatch(f"{name} must have shape {grid.cells}")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise InvalidMaterial(f"{name} must be finite and non-negative")
        return a

    def validate(self, grid: StaggeredGrid) -> None:
        for name in ("eps", "nu", "zeta", "xi"):
            if np.any(self.cellwise(grid, name) <= 0):
                raise InvalidMaterial(f"{name} must be positive on every cell")
        for name in ("sigma", "tau_eq"):
            self.cellwise(grid, name)


def _edge_cells(grid, d, p):
    """Cells sharing the edge ``(d, p)`` with their quarter dual-facet areas."""
    b, c = (d + 1) % 3, (d + 2) % 3
    h = grid.spacing
    out = []
    for ob in (-1, 0):
        for oc in (-1, 0):
            q = list(p)
            q[b] += ob
            q[c] += oc
            if all(0 <= q[a] < grid.cells[a] for a in range(3)):
                out.append((tuple(q), h[b] * h[c] / 4.0))
    return out


def _face_cells(grid, a, p):
    """Cells sharing the facet ``(a, p)`` with their dual-edge segment lengths."""
    out = []
    for o in (-1, 0):
        q = list(p)
        q[a] += o
        if 0 <= q[a] < grid.cells[a]:
            out.append((tuple(q), grid.spacing[a] / 2.0))
    return out


def _point_cells(grid, p):
    out = []
    for off in np.ndindex(2, 2, 2):
        q = tuple(p[a] - off[a] for a in range(3))
        if all(0 <= q[a] < grid.cells[a] for a in range(3)):
            out.append(q)
    return out


def edge_material(grid: StaggeredGrid, coef: np.ndarray) -> np.ndarray:
    """Diagonal of ``M`` for an edge-based coefficient (dual-facet area / length)."""
    out = np.zeros(grid.n_edges)
    for d in range(3):
        for e, p in grid.edges_of(d):
            out[e] = sum(coef[q] * area for q, area in _edge_cells(grid, d, p)) / grid.spacing[d]
    return out


def face_material(grid: StaggeredGrid, coef: np.ndarray) -> np.ndarray:
    """Diagonal of ``M`` for a reluctivity-type coefficient (dual-edge / facet area)."""
    out = np.zeros(grid.n_faces)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        area = grid.spacing[b] * grid.spacing[c]
        for f, p in grid.faces_of(a):
            # normal flux is continuous along the dual edge: add nu * length
            out[f] = sum(coef[q] * ln for q, ln in _face_cells(grid, a, p)) / area
    return out


def point_material(grid: StaggeredGrid, coef: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.n_points)
    for idx, p in grid.points():
        cs = _point_cells(grid, p)
        out[idx] = np.mean([coef[q] for q in cs])
    return out


@dataclass
class MaterialMatrices:
    eps: np.ndarray
    sigma: np.ndarray
    nu: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    nu_tau: np.ndarray

    def diag(self, name):
        return np.diag(getattr(self, name))


def build_material_matrices(grid: StaggeredGrid, mat: MaterialField,
                            ops: GridOperators | None = None) -> MaterialMatrices:
    """Diagonal material matrices (as 1-D diagonals) on free edges/points/faces.

    Without ``ops`` all edges and points are kept.
    """
    mat.validate(grid)
    cw = {n: mat.cellwise(grid, n) for n in ("eps", "sigma", "nu", "zeta", "xi", "tau_eq")}
    fe = ops.free_edges if ops is not None else np.arange(grid.n_edges)
    fp = ops.free_points if ops is not None else np.arange(grid.n_points)
    return MaterialMatrices(
        eps=edge_material(grid, cw["eps"])[fe],
        sigma=edge_material(grid, cw["sigma"])[fe],
        nu=face_material(grid, cw["nu"]),
        zeta=edge_material(grid, cw["zeta"])[fe],
        xi=point_material(grid, cw["xi"])[fp],
        nu_tau=face_material(grid, cw["nu"] * cw["tau_eq"]),
    )


@dataclass
class BoundarySplit:
    Q_s: np.ndarray
    P_s: np.ndarray
    Lambda_s: np.ndarray

    @property
    def Y_s(self):
        return self.P_s @ self.Lambda_s


def boundary_split(ops: GridOperators) -> BoundarySplit:
    """Selection matrices for inner/terminal potentials and the terminal map."""
    pos = {p: k for k, p in enumerate(ops.free_points)}
    term_pts = [p for t in ops.terminals for p in t]
    if len(set(term_pts)) != len(term_pts):
        raise BuildError("terminals overlap")
    missing = [p for p in term_pts if p not in pos]
    if missing:
        raise BuildError(f"terminal points {missing[:3]} are not free points")
    n = len(ops.free_points)
    inner = [k for k, p in enumerate(ops.free_points) if p not in set(term_pts)]
    Q = np.zeros((n, len(inner)))
    Q[inner, np.arange(len(inner))] = 1.0
    P = np.zeros((n, len(term_pts)))
    P[[pos[p] for p in term_pts], np.arange(len(term_pts))] = 1.0
    Lam = np.zeros((len(term_pts), len(ops.terminals)))
    r = 0
    for j, t in enumerate(ops.terminals):
        if not t:
            raise BuildError(f"terminal {j} is empty")
        Lam[r:r + len(t), j] = 1.0
        r += len(t)
    return BoundarySplit(Q, P, Lam)


@dataclass
class DeviceBuild:
    element: DescriptorElement
    blocks: dict
    checks: dict
    ops: GridOperators


def build_em_device(grid: StaggeredGrid, mat: MaterialField, terminals,
                    max_cells: int = MAX_CELLS) -> DeviceBuild:
    """Full-wave A-phi device coupled through boundary terminals.

    ``x = (Phi, a, pi)``; rows ``M x' + A x + B v + N v' = 0`` and ``i - F x = 0``.
    """
    if np.any(mat.cellwise(grid, "tau_eq") != 0):
        raise AssumptionViolated("EM device requires an empty source domain")
    bc = BoundarySpec(terminals=tuple(tuple(t) for t in terminals))
    ops = build_grid_operators(grid, bc, max_cells)
    mm = build_material_matrices(grid, mat, ops)
    split = boundary_split(ops)
    G, Cc = ops.G.astype(float), ops.C.astype(float)
    St, Ct = -G.T, Cc.T
    Qs, Ys = split.Q_s, split.Y_s
    Me, Ms, Mn = np.diag(mm.eps), np.diag(mm.sigma), np.diag(mm.nu)
    Mz, Mx = np.diag(mm.zeta), np.diag(mm.xi)
    nQ, nE, k = Qs.shape[1], G.shape[0], Ys.shape[1]

    LQ = Qs.T @ St @ Me @ G @ Qs
    H = Qs.T @ St @ Mz @ G @ Mx @ St @ Mz
    curlcurl = Ct @ Mn @ Cc
    Z = np.zeros
    I = np.eye(nE)
    M = np.block([[LQ, Z((nQ, nE)), Z((nQ, nE))],
                  [Me @ G @ Qs, Ms, Me],
                  [Z((nE, nQ)), I, Z((nE, nE))]])
    A = np.block([[Z((nQ, nQ)), H, Z((nQ, nE))],
                  [Ms @ G @ Qs, curlcurl, Z((nE, nE))],
                  [Z((nE, nQ)), Z((nE, nE)), -I]])
    N = np.vstack([Z((nQ, k)), Me @ G @ Ys, Z((nE, k))])
    B = np.vstack([Z((nQ, k)), Ms @ G @ Ys, Z((nE, k))])
    F = np.hstack([Z((k, nQ)), Ys.T @ St @ Ct @ Mn @ Cc, Z((k, nE))])

    try:
        Minv_N = np.linalg.solve(M, N)
        Minv_A = np.linalg.solve(M, A)
    except np.linalg.LinAlgError as exc:
        raise BuildError(f"M is singular: {exc}") from None
    if np.linalg.cond(M) > 1e12:
        raise BuildError("M is numerically singular")
    fmn = float(np.abs(F @ Minv_N).max(initial=0.0))
    S_L = F @ Minv_A @ Minv_N
    CGY = Cc @ G @ Ys
    S_L_closed = CGY.T @ Mn @ CGY
    ok, lam = is_positive_definite(S_L)
    checks = {
        "fm_inv_n_norm": fmn,
        "strength_witness_margin": float(lam),
        "closed_form_gap": float(np.abs(S_L - S_L_closed).max(initial=0.0)),
        "identities": ops.identities(),
    }
    if fmn > 1e-10:
        raise BuildError(f"F M^-1 N does not vanish ({fmn:.3g})")
    if not ok:
        raise BuildError(f"F A~ N~ is not positive definite (lambda_min={lam:.3g})")

    nx = nQ + 2 * nE
    el = DescriptorElement.from_blocks(
        nx, k,
        Kx=np.vstack([M, Z((k, nx))]), Kv=np.vstack([N, Z((k, k))]),
        Lx=np.vstack([A, -F]), Li=np.vstack([Z((nx, k)), np.eye(k)]),
        Lv=np.vstack([B, Z((k, k))]), label="em-device")
    blocks = {"M": M, "A": A, "B": B, "N": N, "F": F, "S_L": S_L}
    return DeviceBuild(el, blocks, checks, ops)


def _eqs_default_bc(grid, terminals):
    faces = {f: "neumann" for f in FACES}
    faces["x-"] = "dirichlet"
    return BoundarySpec(faces, tuple(tuple(t) for t in terminals))


def build_eqs_device(grid: StaggeredGrid, mat: MaterialField, terminals,
                     bc: BoundarySpec | None = None, max_cells: int = MAX_CELLS) -> DeviceBuild:
    """Electroquasistatic device; ``x = Phi`` on inner free points.

    Default boundary: Dirichlet on the ``x-`` face, Neumann elsewhere.
    """
    if bc is None:
        bc = _eqs_default_bc(grid, terminals)
    else:
        bc = BoundarySpec(dict(bc.faces), tuple(tuple(t) for t in terminals))
    ops = build_grid_operators(grid, bc, max_cells)
    mm = build_material_matrices(grid, mat, ops)
    split = boundary_split(ops)
    G = ops.G.astype(float)
    Le = G.T @ np.diag(mm.eps) @ G
    Ls = G.T @ np.diag(mm.sigma) @ G
    Q, Y = split.Q_s, split.Y_s
    nQ, k = Q.shape[1], Y.shape[1]
    EQ = Q.T @ Le @ Q
    ok, lam_eq = is_positive_definite(EQ)
    if not ok:
        raise GaugeError("Q_s^T L_eps Q_s is not positive definite")
    Csch = Y.T @ (Le - Le @ Q @ np.linalg.solve(EQ, Q.T @ Le)) @ Y
    okc, lam_c = is_positive_definite(Csch)
    asym = float(np.abs(Csch - Csch.T).max(initial=0.0))
    overlap = int(np.count_nonzero((np.abs(Q).sum(axis=1) > 0) & (np.abs(Y).sum(axis=1) > 0)))
    checks = {"E_Q_margin": float(lam_eq), "schur_margin": float(lam_c),
              "schur_asymmetry": asym, "qs_ys_overlap": overlap,
              "identities": ops.identities()}
    if not okc:
        raise BuildError(f"Schur complement is not positive definite ({lam_c:.3g})")
    el = DescriptorElement.from_blocks(
        nQ, k,
        Kx=np.vstack([EQ, Y.T @ Le @ Q]), Kv=np.vstack([Q.T @ Le @ Y, Y.T @ Le @ Y]),
        Lx=np.vstack([Q.T @ Ls @ Q, Y.T @ Ls @ Q]), Lv=np.vstack([Q.T @ Ls @ Y, Y.T @ Ls @ Y]),
        Li=np.vstack([np.zeros((nQ, k)), -np.eye(k)]), label="eqs-device")
    return DeviceBuild(el, {"L_eps": Le, "L_sigma": Ls, "C": Csch, "Q_s": Q, "Y_s": Y},
                       checks, ops)


def tree_cotree(ops: GridOperators) -> np.ndarray:
    """Positions (into ``free_edges``) of cotree edges.

    The spanning tree is a breadth-first tree over free points with every
    Dirichlet point merged into one ground node, visiting edges in index order.
    """
    n = len(ops.free_points)
    ground = n
    ends = []
    adj = [[] for _ in range(n + 1)]
    for e in range(ops.G.shape[0]):
        nz = np.nonzero(ops.G[e])[0]
        a = nz[0] if len(nz) > 0 else ground
        b = nz[1] if len(nz) > 1 else ground
        ends.append((a, b))
        if a != b:
            adj[a].append((e, b))
            adj[b].append((e, a))
    seen = {ground}
    tree = set()
    queue = deque([ground])
    while queue:
        u = queue.popleft()
        for e, w in sorted(adj[u]):
            if w not in seen:
                seen.add(w)
                tree.add(e)
                queue.append(w)
    if len(seen) != n + 1:
        raise GaugeError("free points are not connected to the Dirichlet boundary")
    return np.array([e for e in range(ops.G.shape[0]) if e not in tree], dtype=int)


def winding_vector(grid: StaggeredGrid, ops: GridOperators, coils) -> np.ndarray:
    """Winding density on free edges from ``coils = [(box, axis, sign), ...]``.

    ``box`` is ``((i0, i1), (j0, j1), (k0, k1))`` in inclusive cell indices;
    every coil cell spreads its unit density over the edges along ``axis``
    with the quarter dual-facet weights.
    """
    X = np.zeros(grid.n_edges)
    for box, axis, sign in coils:
        d = AXES.index(axis) if isinstance(axis, str) else int(axis)
        cells = {(i, j, k) for i in range(box[0][0], box[0][1] + 1)
                 for j in range(box[1][0], box[1][1] + 1)
                 for k in range(box[2][0], box[2][1] + 1)}
        for e, p in grid.edges_of(d):
            for q, area in _edge_cells(grid, d, p):
                if q in cells:
                    X[e] += sign * area
    return X[ops.free_edges]


def build_mqs_device(grid: StaggeredGrid, mat: MaterialField, winding=None, coils=None,
                     max_cells: int = MAX_CELLS) -> DeviceBuild:
    """Eddy-current device with tree-cotree gauge; ``x = a`` on cotree edges.

    Either pass ``winding`` (a vector over free edges, checked against the
    no-excitation-outside-coils condition) or ``coils`` (built and projected).
    """
    ops = build_grid_operators(grid, BoundarySpec(), max_cells)
    mm = build_material_matrices(grid, mat, ops)
    cot = tree_cotree(ops)
    Cg = ops.C.astype(float)[:, cot]
    if rank_svd(Cg) < Cg.shape[1]:
        raise GaugeError("gauged curl does not have full column rank")
    K = Cg.T @ np.diag(mm.nu_tau) @ Cg
    Knu = Cg.T @ np.diag(mm.nu) @ Cg
    Qt = projector_onto_kernel(K, tol=1e-10 * max(1.0, np.abs(K).max(initial=0.0))).matrix
    Pt = np.eye(len(cot)) - Qt
    if np.abs(Pt).max(initial=0.0) < 1e-12:
        raise DegenerateDevice("cable time constant vanishes everywhere (P_tau = 0)")

    if winding is not None:
        Xf = np.asarray(winding, dtype=float).ravel()
        if Xf.size == len(ops.free_edges):
            X = Xf[cot]
        elif Xf.size == len(cot):
            X = Xf
        else:
            raise ShapeMismatch("winding vector has wrong length")
        leak = float(np.abs(Qt.T @ X).max(initial=0.0))
        projection = 0.0
        if leak > 1e-12 * max(1.0, np.abs(X).max(initial=0.0)):
            raise AssumptionViolated(f"winding excites outside the coils (|Q^T X| = {leak:.3g})")
    elif coils is not None:
        X0 = winding_vector(grid, ops, coils)[cot]
        projection = float(np.linalg.norm(Qt.T @ X0))
        X = Pt @ X0
        leak = float(np.abs(Qt.T @ X).max(initial=0.0))
    else:
        raise BuildError("either winding or coils is required")
    if np.linalg.norm(X) == 0:
        raise DegenerateDevice("winding vector vanishes after projection")

    Ginv = X @ Pt @ np.linalg.solve(K + Qt.T @ Qt, Pt.T @ X)
    checks = {"winding_leak": leak, "projection_norm": projection,
              "G_inverse": float(Ginv), "KQ_norm": float(np.abs(K @ Qt).max(initial=0.0)),
              "identities": ops.identities()}
    if not Ginv > 0:
        raise BuildError("G^-1 is not positive")
    na = len(cot)
    el = DescriptorElement.from_blocks(
        na, 1,
        Kx=np.vstack([K, X[None, :]]), Lx=np.vstack([Knu, np.zeros((1, na))]),
        Li=np.vstack([-X[:, None], [[0.0]]]), Lv=np.vstack([np.zeros((na, 1)), [[-1.0]]]),
        label="mqs-device")
    return DeviceBuild(el, {"K": K, "K_nu": Knu, "Q_tau": Qt, "P_tau": Pt, "X": X,
                            "cotree": cot}, checks, ops)
