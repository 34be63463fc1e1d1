"""Fixed-step implicit Euler for linear DAEs and the perturbation probe."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import StepFailure
from .mmio import format_float
from .mna import MnaSystem, consistent_initial_values


@dataclass
class TransientResult:
    t: np.ndarray
    x: np.ndarray  # (len(t), n)
    names: list[str]
    h: float
    method: str = "implicit-euler"
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def column(self, name: str) -> np.ndarray:
        return self.x[:, self.names.index(name)]

    def to_csv(self, path=None) -> str:
        lines = [",".join(["t"] + self.names)]
        for tk, row in zip(self.t, self.x):
            lines.append(",".join(format_float(v) for v in (tk, *row)))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def integrate(sys, t_span, h: float, x0_guess=None, consistent: bool = True,
              tol: float | None = None) -> TransientResult:
    """Implicit Euler ``(E + hA) x_{n+1} = E x_n + h f(t_{n+1})``.

    ``sys`` is anything exposing ``E``, ``A``, ``forcing(t)`` and ``names``.
    The step is shrunk to ``span / ceil(span / h)`` so the grid ends at
    ``t_span[1]``. Initial values are made consistent for MNA systems.
    """
    t0, t1 = (float(v) for v in t_span)
    if not (math.isfinite(t0) and math.isfinite(t1)) or t1 < t0:
        raise ValueError("t_span must be finite and increasing")
    if not h > 0:
        raise ValueError("h must be positive")
    E, A = np.asarray(sys.E, float), np.asarray(sys.A, float)
    n = E.shape[0]
    x0 = np.zeros(n) if x0_guess is None else np.asarray(x0_guess, float).copy()
    if consistent and isinstance(sys, MnaSystem):
        x0 = consistent_initial_values(sys, x0, t0, tol=tol)
    span = t1 - t0
    steps = int(math.ceil(span / h - 1e-9)) if span > 0 else 0
    hh = span / steps if steps else float(h)
    t = t0 + hh * np.arange(steps + 1)
    X = np.zeros((steps + 1, n))
    X[0] = x0
    res = np.zeros(steps)
    if steps:
        J = E + hh * A
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
            raise StepFailure(f"iteration matrix E + hA is singular at h={hh:.3g}")
        lu = lu_factor(J)
        for k in range(steps):
            b = E @ X[k] + hh * np.asarray(sys.forcing(t[k + 1]), float)
            X[k + 1] = lu_solve(lu, b)
            res[k] = float(np.linalg.norm(J @ X[k + 1] - b, np.inf))
    return TransientResult(t, X, list(sys.names), hh, "implicit-euler", res)


@dataclass(frozen=True)
class PerturbedWaveform:
    """``base(t) + eps * sin(omega t)`` with analytic derivatives."""

    base: object
    eps: float
    omega: float

    def derivative(self, t: float, order: int = 0) -> float:
        d = self.eps * self.omega ** order * math.sin(self.omega * t + order * math.pi / 2)
        return self.base.derivative(t, order) + d

    __call__ = derivative


@dataclass
class ProbeResult:
    source: str
    rows: list[dict]
    exponents: dict[str, float | None]
    label: str = "empirical"

    @property
    def max_exponent(self) -> float | None:
        vals = [p for p in self.exponents.values() if p is not None]
        return max(vals) if vals else None

    def to_dict(self) -> dict:
        return {"label": self.label, "source": self.source, "rows": self.rows,
                "exponents": dict(sorted(self.exponents.items())),
                "max_exponent": self.max_exponent}


def perturbation_probe(sys: MnaSystem, source_id: str, eps_list=(1e-3, 1e-2),
                       omegas=(10.0, 100.0, 1000.0), t_end: float = 0.2, h: float = 2e-5,
                       floor: float = 1e-13) -> ProbeResult:
    """Fit ``max |z_eps - z| ~ eps * omega**p`` per unknown (heuristic).

    Channels whose deviation stays below ``floor`` everywhere get ``None``.
    """
    if source_id not in sys.waveforms:
        raise KeyError(f"unknown source {source_id}")
    base = integrate(sys, (0.0, t_end), h)
    rows, logs = [], {name: [] for name in sys.names}
    for eps in eps_list:
        for w in omegas:
            wf = dict(sys.waveforms)
            wf[source_id] = PerturbedWaveform(sys.waveforms[source_id], float(eps), float(w))
            pert = integrate(dataclasses.replace(sys, waveforms=wf), (0.0, t_end), h)
            dev = np.abs(pert.x - base.x).max(axis=0)
            rows.append({"eps": float(eps), "omega": float(w),
                         "deviation": {n: float(d) for n, d in zip(sys.names, dev)}})
            for name, d in zip(sys.names, dev):
                if eps > 0:
                    logs[name].append((math.log(w), d / eps))
    exps = {}
    for name, pts in logs.items():
        pts = [(lw, r) for lw, r in pts]
        if len({lw for lw, _ in pts}) < 2 or max((r for _, r in pts), default=0.0) * \
                max(eps_list, default=0.0) < floor:
            exps[name] = None
            continue
        x = np.array([lw for lw, _ in pts])
        y = np.log(np.maximum([r for _, r in pts], 1e-300))
        exps[name] = float(np.polyfit(x, y, 1)[0])
    return ProbeResult(source_id, rows, exps)
