"""Linear descriptor elements and their structural classification.

An element with internal state ``x``, port currents ``i`` and port voltages
``v`` is stored as

    K @ [x', i', v'] + L @ [x, i, v] = forcing(t)

with ``n_x + n_p`` rows. :func:`classify` tries to bring this system, with at
most one differentiation of its algebraic rows, into one of three templates:

* inductance-like: ``x' = X(v', x, i, v)``, ``i' = g(x, i, v)``
* capacitance-like: ``x' = X(i', x, i, v)``, ``v' = g(x, i, v)``
* resistance-like: ``x' = X(x, i, v)``, ``i' = g(v', x, i, v)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ShapeMismatch, Unclassified
from .linalg import EPS, as_matrix, is_positive_definite

CLASS_NAMES = {
    "L": "inductance-like",
    "C": "capacitance-like",
    "R": "resistance-like",
}
_BY_NAME = {v: k for k, v in CLASS_NAMES.items()}

# dependent port quantity and exogenous input per template
_ROLES = {"L": ("i", "v"), "C": ("v", "i"), "R": ("i", "v")}


@dataclass(frozen=True)
class DescriptorElement:
    n_x: int
    n_p: int
    K: np.ndarray
    L: np.ndarray
    forcing: Callable[[float], np.ndarray] | None = None
    label: str = ""

    def __post_init__(self):
        K = as_matrix(self.K, "K") if np.size(self.K) else np.zeros((self.rows, self.cols))
        L = as_matrix(self.L, "L") if np.size(self.L) else np.zeros((self.rows, self.cols))
        for name, M in (("K", K), ("L", L)):
            if M.shape != (self.rows, self.cols):
                raise ShapeMismatch(
                    f"{name} must be {self.rows}x{self.cols}, got {M.shape}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L", L)

    @property
    def rows(self) -> int:
        return self.n_x + self.n_p

    @property
    def cols(self) -> int:
        return self.n_x + 2 * self.n_p

    def _block(self, M, part):
        nx, npt = self.n_x, self.n_p
        sl = {"x": slice(0, nx), "i": slice(nx, nx + npt), "v": slice(nx + npt, nx + 2 * npt)}
        return M[:, sl[part]]

    Kx = property(lambda self: self._block(self.K, "x"))
    Ki = property(lambda self: self._block(self.K, "i"))
    Kv = property(lambda self: self._block(self.K, "v"))
    Lx = property(lambda self: self._block(self.L, "x"))
    Li = property(lambda self: self._block(self.L, "i"))
    Lv = property(lambda self: self._block(self.L, "v"))

    @classmethod
    def from_blocks(cls, n_x, n_p, Kx=None, Ki=None, Kv=None, Lx=None, Li=None,
                    Lv=None, forcing=None, label=""):
        rows = n_x + n_p

        def blk(M, c):
            return np.zeros((rows, c)) if M is None else np.asarray(M, float).reshape(rows, c)

        K = np.hstack([blk(Kx, n_x), blk(Ki, n_p), blk(Kv, n_p)])
        L = np.hstack([blk(Lx, n_x), blk(Li, n_p), blk(Lv, n_p)])
        return cls(n_x, n_p, K, L, forcing, label)


def _square_param(P, name) -> np.ndarray:
    M = as_matrix(P, name)
    if M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got {M.shape}")
    return M


def make_resistor(R, label="R") -> DescriptorElement:
    """``v - R i = 0``."""
    R = _square_param(R, "R")
    n = R.shape[0]
    return DescriptorElement.from_blocks(0, n, Li=-R, Lv=np.eye(n), label=label)


def make_inductor(L, label="L") -> DescriptorElement:
    """``v - L i' = 0``."""
    L = _square_param(L, "L")
    n = L.shape[0]
    return DescriptorElement.from_blocks(0, n, Ki=-L, Lv=np.eye(n), label=label)


def make_capacitor(C, label="C") -> DescriptorElement:
    """``C v' - i = 0``."""
    C = _square_param(C, "C")
    n = C.shape[0]
    return DescriptorElement.from_blocks(0, n, Kv=C, Li=-np.eye(n), label=label)


def make_flux_inductor(dphi_di, label="L") -> DescriptorElement:
    """``v = Phi'``, ``Phi = (dphi/di) i`` with the flux as internal state."""
    D = _square_param(dphi_di, "dphi/di")
    n = D.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return DescriptorElement.from_blocks(
        n, n, Kx=np.vstack([-I, Z]), Lx=np.vstack([Z, I]),
        Li=np.vstack([Z, -D]), Lv=np.vstack([I, Z]), label=label)


def make_charge_capacitor(dq_dv, label="C") -> DescriptorElement:
    """``i = q'``, ``q = (dq/dv) v`` with the charge as internal state."""
    D = _square_param(dq_dv, "dq/dv")
    n = D.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return DescriptorElement.from_blocks(
        n, n, Kx=np.vstack([-I, Z]), Lx=np.vstack([Z, I]),
        Li=np.vstack([I, Z]), Lv=np.vstack([Z, -D]), label=label)


def evaluate(el: DescriptorElement, x, i, v, xdot, idot, vdot, t: float = 0.0) -> np.ndarray:
    """Residual ``K [x'; i'; v'] + L [x; i; v] - forcing(t)``."""
    def vec(a, n, name):
        a = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
        if a.size != n:
            raise ShapeMismatch(f"{name} has {a.size} entries, expected {n}")
        return a

    nx, npt = el.n_x, el.n_p
    d = np.concatenate([vec(xdot, nx, "x'"), vec(idot, npt, "i'"), vec(vdot, npt, "v'")])
    s = np.concatenate([vec(x, nx, "x"), vec(i, npt, "i"), vec(v, npt, "v")])
    r = el.K @ d + el.L @ s
    if el.forcing is not None:
        r = r - np.asarray(el.forcing(t), dtype=float).ravel()
    return r


@dataclass
class Reduction:
    """Explicit derivative form obtained for one template.

    With ``w = (x, d)`` (``d`` the dependent port quantity, ``u`` the input)::

        w' = Ww @ w + Wup @ u' + Wu @ u   (+ time-dependent terms)
    """

    cls: str
    differentiations: int
    n_x: int
    Ww: np.ndarray
    Wup: np.ndarray
    Wu: np.ndarray

    def rows(self, part):
        return slice(0, self.n_x) if part == "x" else slice(self.n_x, None)

    def block(self, M, row, col=None):
        R = M[self.rows(row)]
        if col is None:
            return R
        return R[:, self.rows(col)]


@dataclass
class ClassificationReport:
    element_class: str
    strong: bool
    differentiations_used: int | None
    witness: np.ndarray | None
    margin: float | None
    warnings: list[str] = field(default_factory=list)
    matches: list[str] = field(default_factory=list)
    reduction: Reduction | None = None
    reasons: dict[str, str] = field(default_factory=dict)

    @property
    def letter(self) -> str | None:
        return _BY_NAME.get(self.element_class)

    def to_dict(self) -> dict:
        return {
            "class": self.element_class,
            "strong": self.strong,
            "differentiations_used": self.differentiations_used,
            "margin": self.margin,
            "witness": None if self.witness is None else self.witness.tolist(),
            "matches": list(self.matches),
            "warnings": list(self.warnings),
            "reasons": dict(sorted(self.reasons.items())),
        }


class _TemplateMismatch(Exception):
    pass


def _normalize_hint(hint):
    if hint is None:
        return None
    if hint in CLASS_NAMES:
        return hint
    if hint in _BY_NAME:
        return _BY_NAME[hint]
    raise ValueError(f"unknown class hint {hint!r}")


def _rank_and_warn(s, t, warnings, what):
    r = int(np.count_nonzero(s > t))
    near = np.count_nonzero((s > t) & (s <= 1e3 * t))
    if near:
        warnings.append(f"ToleranceWarning: {what} has {near} singular value(s) within 1e3*tol")
    return r


def _reduce(el: DescriptorElement, cls: str, tol, warnings) -> Reduction:
    dep, inp = _ROLES[cls]
    blocks = {"i": (el.Ki, el.Li), "v": (el.Kv, el.Lv)}
    Kd, Ld = blocks[dep]
    Ku, Lu = blocks[inp]
    Kw = np.hstack([el.Kx, Kd])
    Lw = np.hstack([el.Lx, Ld])
    nw = Kw.shape[1]
    if Kw.shape[0] != nw:
        raise _TemplateMismatch("element system is not square")
    if nw == 0:
        raise _TemplateMismatch("empty element")
    scale = max(np.abs(el.K).max(initial=0.0), np.abs(el.L).max(initial=0.0), EPS)
    t = tol if tol is not None else 1e3 * nw * EPS * scale

    u, s, _ = np.linalg.svd(Kw)
    r = _rank_and_warn(s, t, warnings, f"{cls}: leading matrix")
    if r == nw:
        diffs = 0
        Kf, Lf, Kuf, Luf = Kw, Lw, Ku, Lu
    else:
        Ut = u.T
        Kw_r, Lw_r, Ku_r, Lu_r = Ut @ Kw, Ut @ Lw, Ut @ Ku, Ut @ Lu
        if np.abs(Ku_r[r:]).max(initial=0.0) > t:
            raise _TemplateMismatch(
                f"algebraic rows contain the derivative of {inp}; "
                f"differentiating them would need {inp}''")
        diffs = 1
        # differentiated algebraic rows: Lw2 w' + Lu2 u' = (forcing)'
        Kf = np.vstack([Kw_r[:r], Lw_r[r:]])
        Lf = np.vstack([Lw_r[:r], np.zeros((nw - r, nw))])
        Kuf = np.vstack([Ku_r[:r], Lu_r[r:]])
        Luf = np.vstack([Lu_r[:r], np.zeros((nw - r, Lu.shape[1]))])
        s2 = np.linalg.svd(Kf, compute_uv=False)
        if _rank_and_warn(s2, t, warnings, f"{cls}: differentiated matrix") < nw:
            raise _TemplateMismatch("one differentiation does not suffice")

    Ww = -np.linalg.solve(Kf, Lf)
    Wup = -np.linalg.solve(Kf, Kuf)
    Wu = -np.linalg.solve(Kf, Luf)
    red = Reduction(cls, diffs, el.n_x, Ww, Wup, Wu)

    zero_tol = 1e-8 * max(1.0, np.abs(Wup).max(initial=0.0))
    if cls in ("L", "C"):
        leak = np.abs(red.block(Wup, "d")).max(initial=0.0)
        if leak > zero_tol:
            raise _TemplateMismatch(
                f"{dep}' depends on {inp}' (coefficient {leak:.3g})")
    else:
        leak = np.abs(red.block(Wup, "x")).max(initial=0.0)
        if leak > zero_tol:
            raise _TemplateMismatch(f"x' depends on {inp}' (coefficient {leak:.3g})")
    return red


def witness_matrix(red: Reduction) -> np.ndarray:
    """Matrix whose positive definiteness certifies the strong property."""
    if red.cls == "R":
        return red.block(red.Wup, "d")
    # d_x g @ d_{u'} X + d_u g
    return red.block(red.Ww, "d", "x") @ red.block(red.Wup, "x") + red.block(red.Wu, "d")


def classify(el: DescriptorElement, hint: str | None = None, tol: float | None = None,
             all_classes: bool = False) -> ClassificationReport:
    """Classify a linear descriptor element.

    With a ``hint`` only that template is tried and failure raises
    :class:`Unclassified`. Without one, templates are tried in the order L, C, R
    and the first match wins; ``all_classes`` records every match.
    """
    hint = _normalize_hint(hint)
    order = [hint] if hint else ["L", "C", "R"]
    reasons, matches, warnings = {}, [], []
    first = None
    for cls in order:
        try:
            red = _reduce(el, cls, tol, warnings)
        except _TemplateMismatch as exc:
            reasons[CLASS_NAMES[cls]] = str(exc)
            continue
        matches.append(CLASS_NAMES[cls])
        if first is None:
            first = red
            if not all_classes:
                break
    if first is None:
        if hint:
            raise Unclassified(f"{el.label or 'element'} is not {CLASS_NAMES[hint]}: "
                               f"{reasons[CLASS_NAMES[hint]]}")
        return ClassificationReport("unclassified", False, None, None, None,
                                    warnings, [], None, reasons)
    W = witness_matrix(first)
    strong, margin = is_positive_definite(W)
    return ClassificationReport(CLASS_NAMES[first.cls], bool(strong), first.differentiations,
                                W, float(margin), warnings, matches, first, reasons)


def spot_check_strength(jacobian: Callable[[np.ndarray], np.ndarray], samples) -> tuple[bool, float]:
    """Pointwise definiteness check of a user-asserted nonlinear element.

    ``jacobian(p)`` returns the witness matrix at sample point ``p``. Passing
    says nothing about points that were not sampled.
    """
    worst = np.inf
    for p in samples:
        ok, lam = is_positive_definite(jacobian(p))
        worst = min(worst, lam)
        if not ok:
            return False, float(worst)
    return True, float(worst)
