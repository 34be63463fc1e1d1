"""Dense linear-algebra primitives: ranks, kernels, projectors, definiteness and
the shuffle-algorithm index of a linear constant-coefficient pencil.

All functions are pure. Rank decisions use singular values with an explicit or
default tolerance ``max(m, n) * eps * sigma_max``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMatrix, ShapeMismatch, SingularPencil

EPS = np.finfo(float).eps


def as_matrix(M, name="matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array (1-D input becomes a row)."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(1, -1)
    elif A.ndim != 2:
        raise InvalidMatrix(f"{name} must be 2-D, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return A


def default_tol(M: np.ndarray, s: np.ndarray | None = None) -> float:
    if M.size == 0:
        return 0.0
    if s is None:
        s = np.linalg.svd(M, compute_uv=False)
    smax = s[0] if s.size else 0.0
    return max(M.shape) * EPS * smax


def rank_svd(M, tol: float | None = None) -> int:
    """Number of singular values strictly above ``tol``."""
    A = as_matrix(M)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if tol is None:
        tol = default_tol(A, s)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return int(np.count_nonzero(s > tol))


def is_positive_definite(M, margin: float | None = None) -> tuple[bool, float]:
    """Test ``x^T M x > 0`` via the symmetric part.

    Returns ``(flag, lam_min)`` where ``lam_min`` is the smallest eigenvalue of
    ``(M + M^T) / 2``; it is the strong-monotonicity constant of ``x -> M x``
    when positive.
    """
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"square matrix required, got {A.shape}")
    if A.size == 0:
        # the map on R^0 is vacuously strongly monotone
        return True, float("inf")
    sym = 0.5 * (A + A.T)
    lam_min = float(np.linalg.eigvalsh(sym)[0])
    threshold = 1e-12 * np.linalg.norm(A, 2)
    if margin is not None:
        threshold = max(threshold, margin)
    return lam_min > threshold, lam_min


def null_space_basis(M, tol: float | None = None) -> np.ndarray:
    """Orthonormal columns spanning ``ker M``."""
    A = as_matrix(M)
    m, n = A.shape
    if n == 0:
        return np.zeros((0, 0))
    if m == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    if tol is None:
        tol = default_tol(A, s)
    r = int(np.count_nonzero(s > tol))
    return vt[r:].T.copy()


def range_basis(M, tol: float | None = None) -> np.ndarray:
    """Orthonormal columns spanning ``im M``."""
    A = as_matrix(M)
    m, n = A.shape
    if m == 0 or n == 0:
        return np.zeros((m, 0))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    if tol is None:
        tol = default_tol(A, s)
    r = int(np.count_nonzero(s > tol))
    return u[:, :r].copy()


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray
    kind: str  # "onto-kernel" | "along-kernel"
    source: np.ndarray
    tolerance: float

    @property
    def complement(self) -> np.ndarray:
        return np.eye(self.matrix.shape[0]) - self.matrix

    def check(self) -> None:
        """Assert the projector invariants at ``10 * tolerance``."""
        P, M = self.matrix, self.source
        bound = 10 * max(self.tolerance, EPS * max(1.0, np.abs(M).max(initial=0.0)))
        assert np.abs(P @ P - P).max(initial=0.0) <= bound
        if self.kind == "onto-kernel":
            assert np.abs(M @ P).max(initial=0.0) <= bound
        else:
            assert np.abs(M @ P - M).max(initial=0.0) <= bound


def _projector_tol(A: np.ndarray, tol):
    if tol is not None:
        return tol
    return default_tol(A) if A.size else 0.0


def projector_onto_kernel(M, tol: float | None = None) -> Projector:
    """Orthogonal projector ``Q = B B^T`` onto ``ker M``."""
    A = as_matrix(M)
    B = null_space_basis(A, tol)
    Q = B @ B.T if B.size else np.zeros((A.shape[1], A.shape[1]))
    return Projector(Q, "onto-kernel", A, _projector_tol(A, tol))


def projector_along_kernel(M, tol: float | None = None) -> Projector:
    """Orthogonal projector ``P = I - Q`` with ``ker P = ker M``."""
    A = as_matrix(M)
    Q = projector_onto_kernel(A, tol)
    P = np.eye(A.shape[1]) - Q.matrix
    return Projector(P, "along-kernel", A, Q.tolerance)


@dataclass
class PencilIndexResult:
    index: int | None
    regular: bool
    shuffle_steps: list[dict] = field(default_factory=list)


# deterministic sample points for the regularity test
_LAMBDAS = (0.6180339887498949, -1.3247179572447460, 2.718281828459045)


def _pencil_scale(E, A):
    return max(np.linalg.norm(E, 2) if E.size else 0.0,
               np.linalg.norm(A, 2) if A.size else 0.0, EPS)


def _balance(E, A):
    # the index does not change under E -> aE, A -> bA; unit norms keep the
    # sampled lambdas and default tolerances meaningful at any scale
    ne = np.linalg.norm(E, 2) if E.size else 0.0
    na = np.linalg.norm(A, 2) if A.size else 0.0
    return (E / ne if ne > 0 else E), (A / na if na > 0 else A)


def is_regular_pencil(E, A, tol: float | None = None) -> bool:
    E = as_matrix(E, "E")
    A = as_matrix(A, "A")
    n = E.shape[0]
    if n == 0:
        return True
    if tol is None:
        E, A = _balance(E, A)
    scale = _pencil_scale(E, A)
    t = tol if tol is not None else 1e3 * n * EPS * scale
    return any(rank_svd(lam * E + A, t * (1 + abs(lam))) == n for lam in _LAMBDAS)


def pencil_index(E, A, tol: float | None = None) -> PencilIndexResult:
    """Index of ``E x' + A x = f`` by the shuffle algorithm.

    Each step row-compresses ``E`` with an SVD, keeps the differential rows and
    replaces every algebraic row ``0 = A2 x - f2`` by its derivative
    ``A2 x' = f2'``. The number of steps until ``E`` is nonsingular is the
    index. ``tol`` is an absolute threshold on singular values; by default it is
    ``1e3 * n * eps * max(|E|, |A|)`` re-evaluated at every step, after E and A
    are each scaled to unit norm.
    """
    E = as_matrix(E, "E")
    A = as_matrix(A, "A")
    if E.shape != A.shape or E.shape[0] != E.shape[1]:
        raise ShapeMismatch(f"pencil needs square equal shapes, got {E.shape}, {A.shape}")
    n = E.shape[0]
    if n == 0:
        return PencilIndexResult(0, True, [])
    if tol is None:
        E, A = _balance(E, A)
    if not is_regular_pencil(E, A, tol):
        raise SingularPencil("det(lambda E + A) vanishes identically")
    steps = []
    for k in range(n + 2):
        u, s, _ = np.linalg.svd(E)
        t = tol if tol is not None else 1e3 * n * EPS * _pencil_scale(E, A)
        r = int(np.count_nonzero(s > t))
        steps.append({"step": k, "rank_E": r, "tol": float(t)})
        if r == n:
            return PencilIndexResult(k, True, steps)
        E_rot = u.T @ E
        A_rot = u.T @ A
        if rank_svd(A_rot[r:], t) < n - r:
            # an algebraic row without any unknown: pencil is singular
            raise SingularPencil("algebraic row vanished during shuffle")
        E = np.vstack([E_rot[:r], A_rot[r:]])
        A = np.vstack([A_rot[:r], np.zeros((n - r, n))])
    raise SingularPencil("shuffle did not terminate within n + 1 steps")
