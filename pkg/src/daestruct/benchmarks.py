"""Hand-built linear benchmark circuits.

``expected_oracle`` is the index computed independently (derivative array);
``claimed_oracle`` is the index the structural literature attributes to the
topology, kept separately where the two differ.
"""

from __future__ import annotations

from dataclasses import dataclass

from .elements import (make_capacitor, make_charge_capacitor, make_flux_inductor,
                       make_inductor, make_resistor)
from .mna import ElementBinding, MnaSystem, assemble
from .topology import Branch, CircuitGraph
from .waveforms import Waveform, dc

_MAKERS = {"R": make_resistor, "L": make_inductor, "C": make_capacitor,
           "Lflux": make_flux_inductor, "Cq": make_charge_capacitor}


def build_circuit(nodes: int, lines) -> MnaSystem:
    """``lines``: ``(id, n_from, n_to, kind, value)``; kind in R L C V I Lflux Cq.

    Source values may be numbers (dc) or :class:`Waveform` objects.
    """
    branches, elements, sources = [], {}, {}
    for bid, a, b, kind, val in lines:
        base = kind[0]
        branches.append(Branch(bid, a, b, base))
        if base in "VI":
            sources[bid] = val if isinstance(val, Waveform) else dc(val)
        else:
            elements[bid] = ElementBinding(_MAKERS[kind](val, label=bid))
    return assemble(CircuitGraph(nodes, branches), elements, sources)


@dataclass(frozen=True)
class Benchmark:
    name: str
    nodes: int
    lines: tuple
    expected_bound: str
    expected_oracle: int
    claimed_oracle: int | None = None
    category: str = ""

    def system(self) -> MnaSystem:
        return build_circuit(self.nodes, self.lines)


SIN = Waveform("sin", (0.0, 1.0, 1.0))

BENCHMARKS = (
    Benchmark("series_rlc", 4, (("V1", 1, 0, "V", SIN), ("R1", 1, 2, "R", 1.0),
                                ("L1", 2, 3, "L", 1.0), ("C1", 3, 0, "C", 1.0)),
              "<=1", 1, category="no-loop-no-cutset"),
    Benchmark("rc_series", 3, (("V1", 1, 0, "V", 1.0), ("R1", 1, 2, "R", 1.0),
                               ("C1", 2, 0, "C", 1.0)), "<=1", 1, category="no-loop-no-cutset"),
    Benchmark("rl_series", 3, (("V1", 1, 0, "V", 1.0), ("R1", 1, 2, "R", 1.0),
                               ("L1", 2, 0, "L", 1.0)), "<=1", 1, category="no-loop-no-cutset"),
    Benchmark("resistive_divider", 3, (("V1", 1, 0, "V", 2.0), ("R1", 1, 2, "R", 1.0),
                                       ("R2", 2, 0, "R", 3.0)), "<=1", 1,
              category="no-loop-no-cutset"),
    Benchmark("mixed_rc_rl_two_loop", 4, (("V1", 1, 0, "V", SIN), ("R1", 1, 2, "R", 1.0),
                                          ("C1", 2, 0, "C", 0.5), ("R2", 2, 3, "R", 2.0),
                                          ("L1", 3, 0, "L", 1.5), ("R3", 1, 3, "R", 1.0)),
              "<=1", 1, category="no-loop-no-cutset"),
    Benchmark("c_parallel_v", 2, (("V1", 1, 0, "V", SIN), ("C1", 1, 0, "C", 1.0),
                                  ("R1", 1, 0, "R", 1.0)), "<=2", 2, 2, category="cv-loop"),
    Benchmark("cv_loop_two_caps", 3, (("V1", 1, 0, "V", SIN), ("C1", 1, 2, "C", 1.0),
                                      ("C2", 2, 0, "C", 2.0), ("R1", 2, 0, "R", 1.0)),
              "<=2", 2, 2, category="cv-loop"),
    Benchmark("charge_c_parallel_v", 2, (("V1", 1, 0, "V", SIN), ("C1", 1, 0, "Cq", 1.0),
                                         ("R1", 1, 0, "R", 1.0)), "<=2", 2, 2,
              category="cv-loop"),
    Benchmark("l_series_i", 3, (("I1", 0, 1, "I", SIN), ("L1", 1, 2, "L", 1.0),
                                ("R1", 2, 0, "R", 1.0)), "<=2", 2, 2, category="li-cutset"),
    Benchmark("flux_l_series_i", 3, (("I1", 0, 1, "I", SIN), ("L1", 1, 2, "Lflux", 2.0),
                                     ("R1", 2, 0, "R", 1.0)), "<=2", 2, 2,
              category="li-cutset"),
    Benchmark("pure_l_cutset", 4, (("V1", 1, 0, "V", SIN), ("R1", 1, 2, "R", 1.0),
                                   ("L1", 2, 3, "L", 1.0), ("L2", 3, 0, "L", 2.0)),
              "<=2", 2, 2, category="li-cutset"),
    # a loop of capacitors alone: node potentials already satisfy the loop law,
    # the pencil has index 1 although the topology contains a CV-loop
    Benchmark("pure_c_loop", 3, (("V1", 1, 0, "V", SIN), ("R1", 1, 2, "R", 1.0),
                                 ("C1", 2, 0, "C", 1.0), ("C2", 2, 0, "C", 2.0)),
              "<=2", 1, 2, category="c-loop"),
    Benchmark("mixed_cv_li_two_loop", 4, (("V1", 1, 0, "V", SIN), ("C1", 1, 0, "C", 1.0),
                                          ("R1", 1, 2, "R", 1.0), ("C2", 2, 0, "C", 1.0),
                                          ("L1", 2, 3, "L", 1.0), ("I1", 3, 0, "I", SIN)),
              "<=2", 2, 2, category="cv-loop+li-cutset"),
)


def by_name(name: str) -> Benchmark:
    for b in BENCHMARKS:
        if b.name == name:
            return b
    raise KeyError(name)
