"""Independent source waveforms with analytic time derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Waveform:
    """``dc``: ``(value,)``; ``sin``: ``(offset, amp, freq[, phase])``;
    ``pwl``: ``(t0, v0, t1, v1, ...)`` with strictly increasing times."""

    kind: str
    params: tuple

    def __post_init__(self):
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "dc" and len(p) != 1:
            raise ValueError("dc needs one value")
        if self.kind == "sin" and len(p) not in (3, 4):
            raise ValueError("sin needs offset amp freq [phase]")
        if self.kind == "pwl":
            if len(p) < 2 or len(p) % 2:
                raise ValueError("pwl needs time/value pairs")
            if np.any(np.diff(p[0::2]) <= 0):
                raise ValueError("pwl times must increase strictly")
        if self.kind not in ("dc", "sin", "pwl"):
            raise ValueError(f"unknown waveform {self.kind!r}")

    def __call__(self, t: float, order: int = 0) -> float:
        return self.derivative(t, order)

    def derivative(self, t: float, order: int = 0) -> float:
        """``order``-th time derivative; pwl is piecewise linear with zero
        curvature between knots (see :meth:`at_knot`)."""
        p = self.params
        if self.kind == "dc":
            return p[0] if order == 0 else 0.0
        if self.kind == "sin":
            off, amp, f = p[:3]
            ph = p[3] if len(p) > 3 else 0.0
            w = 2 * math.pi * f
            val = amp * w ** order * math.sin(w * t + ph + order * math.pi / 2)
            return val + (off if order == 0 else 0.0)
        ts, vs = np.array(p[0::2]), np.array(p[1::2])
        if order == 0:
            return float(np.interp(t, ts, vs))
        if order >= 2 or t < ts[0] or t >= ts[-1]:
            return 0.0
        k = int(np.searchsorted(ts, t, side="right")) - 1
        return float((vs[k + 1] - vs[k]) / (ts[k + 1] - ts[k]))

    def at_knot(self, t: float, rtol: float = 1e-12) -> bool:
        if self.kind != "pwl":
            return False
        ts = np.array(self.params[0::2])
        return bool(np.any(np.abs(ts - t) <= rtol * max(1.0, abs(t))))


def dc(value: float) -> Waveform:
    return Waveform("dc", (value,))
