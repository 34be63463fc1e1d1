"""Netlist and device-spec text formats.

Netlist grammar (one statement per line, ``#`` starts a comment, keywords are
case-insensitive)::

    .nodes 4                          optional; default is max node + 1
    V1 1 0 dc 1 | V1 1 0 1 | V1 1 0 sin 0 1 50 [phase] | V1 1 0 pwl 0 0 1e-3 1
    I1 0 1 dc 1e-3                    same waveforms as V
    R1 1 2 R=1k                       or a bare value; SI suffixes f p n u m k meg g t
    L1 2 3 L=1m [form=flux]
    C1 3 0 C=1u [form=charge]
    X1 1 0 class=L descriptor=em.mtx [port=1] [strong=verify|asserted] [element=X1]
    .index
    .tran 1e-3 1e-6
    .probe e1 i_R1

A descriptor file holds one Matrix Market matrix ``[K | L]`` with the comment
``daestruct-descriptor n_x=<int> n_p=<int>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elements import (DescriptorElement, make_capacitor, make_charge_capacitor,
                       make_flux_inductor, make_inductor, make_resistor)
from .errors import DaeStructError, ParseError
from .mmio import read_comments, read_matrix, write_matrix
from .mna import ElementBinding, MnaSystem, assemble
from .topology import Branch, CircuitGraph
from .waveforms import Waveform

_SUFFIX = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3, "k": 1e3,
           "meg": 1e6, "g": 1e9, "t": 1e12}
_NUM = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)(meg|[fpnumkgt])?$", re.I)
_CLASS_ALIASES = {"l": "L", "c": "C", "r": "R", "inductance-like": "L",
                  "capacitance-like": "C", "resistance-like": "R"}


def parse_value(tok: str, line: int | None = None) -> float:
    m = _NUM.match(tok.strip())
    if not m:
        raise ParseError(f"bad number {tok!r}", line)
    val = float(m.group(1))
    if m.group(2):
        val *= _SUFFIX[m.group(2).lower()]
    return val


@dataclass
class BranchLine:
    id: str
    kind: str  # R L C V I X
    n_from: int
    n_to: int
    params: dict
    line: int


@dataclass
class Netlist:
    branches: list[BranchLine]
    node_count: int
    waveforms: dict[str, Waveform] = field(default_factory=dict)
    index: bool = False
    tran: tuple[float, float] | None = None
    probe: list[str] = field(default_factory=list)
    base_dir: Path = Path(".")

    def graph(self) -> CircuitGraph:
        brs = []
        for b in self.branches:
            if b.kind == "X":
                brs.append(Branch(b.id, b.n_from, b.n_to, b.params["class"],
                                  b.params.get("element", b.id), int(b.params.get("port", 1))))
            else:
                brs.append(Branch(b.id, b.n_from, b.n_to, b.kind))
        return CircuitGraph(self.node_count, brs)

    def elements(self) -> dict:
        out = {}
        ports: dict[str, int] = {}
        for b in self.branches:
            p = b.params
            if b.kind == "R":
                out[b.id] = ElementBinding(make_resistor(p["value"], label=b.id))
            elif b.kind == "L":
                mk = make_flux_inductor if p.get("form") == "flux" else make_inductor
                out[b.id] = ElementBinding(mk(p["value"], label=b.id))
            elif b.kind == "C":
                mk = make_charge_capacitor if p.get("form") == "charge" else make_capacitor
                out[b.id] = ElementBinding(mk(p["value"], label=b.id))
            elif b.kind == "X":
                name = p.get("element", b.id)
                ports[name] = ports.get(name, 0) + 1
                if name in out:
                    continue
                strong = p.get("strong", "verify")
                el = None
                if "descriptor" in p:
                    try:
                        el = read_descriptor(self.base_dir / p["descriptor"])
                    except (OSError, ValueError, DaeStructError) as exc:
                        raise ParseError(f"descriptor {p['descriptor']}: {exc}", b.line) from None
                elif strong != "asserted":
                    raise ParseError(f"{b.id}: descriptor= required unless strong=asserted",
                                     b.line)
                out[name] = (el, strong)
        for name, val in list(out.items()):
            if isinstance(val, tuple):
                el, strong = val
                out[name] = ElementBinding(el, strong, None if el is not None else ports[name])
        return out

    def system(self) -> MnaSystem:
        return assemble(self.graph(), self.elements(), dict(self.waveforms))


def _kv(tokens, line):
    out, bare = {}, []
    for t in tokens:
        if "=" in t:
            k, _, v = t.partition("=")
            out[k.strip().lower()] = v.strip()
        else:
            bare.append(t)
    return out, bare


def _waveform(tokens, line) -> Waveform:
    if not tokens:
        raise ParseError("source without value", line)
    kind = tokens[0].lower()
    try:
        if kind in ("dc", "sin", "pwl"):
            vals = [parse_value(t, line) for t in tokens[1:]]
            return Waveform(kind, tuple(vals))
        if len(tokens) == 1:
            return Waveform("dc", (parse_value(tokens[0], line),))
    except ValueError as exc:
        raise ParseError(str(exc), line) from None
    raise ParseError(f"unknown waveform {tokens[0]!r}", line)


def parse_netlist(text: str, base_dir=".") -> Netlist:
    """Line-oriented parse; errors carry line numbers."""
    branches: list[BranchLine] = []
    waveforms = {}
    seen = {}
    declared = None
    index, tran, probe = False, None, []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        if head.startswith("."):
            d = head.lower()
            if d == ".nodes":
                if len(tok) != 2:
                    raise ParseError(".nodes takes one integer", no)
                declared = int(parse_value(tok[1], no))
            elif d == ".index":
                index = True
            elif d == ".tran":
                if len(tok) != 3:
                    raise ParseError(".tran takes t_end and h", no)
                tran = (parse_value(tok[1], no), parse_value(tok[2], no))
            elif d == ".probe":
                probe += tok[1:]
            elif d == ".end":
                break
            else:
                raise ParseError(f"unknown directive {head}", no)
            continue
        letter = head[0].upper()
        if letter not in "RLCVIX":
            raise ParseError(f"unknown class letter {head[0]!r} in {head}", no)
        if len(tok) < 3:
            raise ParseError(f"{head}: expected id, two nodes and parameters", no)
        if head.upper() in seen:
            raise ParseError(f"duplicate id {head} (first on line {seen[head.upper()]})", no)
        seen[head.upper()] = no
        try:
            n1, n2 = int(tok[1]), int(tok[2])
        except ValueError:
            raise ParseError(f"{head}: node indices must be integers", no) from None
        if n1 < 0 or n2 < 0:
            raise ParseError(f"{head}: negative node index", no)
        if n1 == n2:
            raise ParseError(f"{head}: self-loop at node {n1}", no)
        kv, bare = _kv(tok[3:], no)
        params = dict(kv)
        if letter in "VI":
            waveforms[head] = _waveform(tok[3:], no)
        elif letter in "RLC":
            key = letter.lower()
            if key in kv:
                params["value"] = parse_value(kv[key], no)
            elif len(bare) == 1:
                params["value"] = parse_value(bare[0], no)
            else:
                raise ParseError(f"{head}: missing {letter} value", no)
            if params["value"] <= 0:
                raise ParseError(f"{head}: {letter} must be positive", no)
            form = params.get("form")
            if form not in (None, "flux", "charge") or \
                    (form == "flux" and letter != "L") or (form == "charge" and letter != "C"):
                raise ParseError(f"{head}: unsupported form {form!r}", no)
        else:
            cls = _CLASS_ALIASES.get(kv.get("class", "").lower())
            if cls is None:
                raise ParseError(f"{head}: class= must be L, C or R", no)
            params["class"] = cls
            if params.get("strong", "verify") not in ("verify", "asserted"):
                raise ParseError(f"{head}: strong= must be verify or asserted", no)
            if "port" in params and not params["port"].isdigit():
                raise ParseError(f"{head}: port must be a positive integer", no)
        branches.append(BranchLine(head, letter, n1, n2, params, no))

    if not branches:
        raise ParseError("netlist has no branches")
    max_node = max(max(b.n_from, b.n_to) for b in branches)
    count = declared if declared is not None else max_node + 1
    degree = {}
    for b in branches:
        for n in (b.n_from, b.n_to):
            if n >= count:
                raise ParseError(f"{b.id}: node {n} not declared (.nodes {count})", b.line)
            degree[n] = degree.get(n, 0) + 1
    for b in branches:
        for n in (b.n_from, b.n_to):
            if degree[n] == 1:
                raise ParseError(f"{b.id}: dangling node {n}", b.line)
    return Netlist(branches, count, waveforms, index, tran, probe, Path(base_dir))


def load_netlist(path) -> Netlist:
    path = Path(path)
    return parse_netlist(path.read_text(encoding="utf-8"), path.parent)


def write_descriptor(path, el: DescriptorElement, extra=()) -> None:
    header = [f"daestruct-descriptor n_x={el.n_x} n_p={el.n_p}", *extra]
    write_matrix(path, np.hstack([el.K, el.L]), header)


def read_descriptor(path) -> DescriptorElement:
    M = read_matrix(path)
    nx = npt = None
    for c in read_comments(path):
        m = re.search(r"daestruct-descriptor\s+n_x=(\d+)\s+n_p=(\d+)", c)
        if m:
            nx, npt = int(m.group(1)), int(m.group(2))
    rows, cols = M.shape
    if nx is None:
        npt = cols // 2 - rows
        nx = rows - npt
    if nx < 0 or npt < 1 or rows != nx + npt or cols != 2 * (nx + 2 * npt):
        raise ValueError(f"matrix {M.shape} is not a [K | L] descriptor")
    half = cols // 2
    return DescriptorElement(nx, npt, M[:, :half], M[:, half:], label=Path(path).stem)


@dataclass
class DeviceSpec:
    device: str
    cells: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    values: dict = field(default_factory=dict)
    terminals: list = field(default_factory=list)  # face names or point boxes
    boundary: dict = field(default_factory=dict)
    coils: list = field(default_factory=list)
    regions: dict = field(default_factory=dict)  # coefficient -> list of cell boxes
    max_cells: int | None = None


def parse_box(tokens, line=None):
    if len(tokens) != 3:
        raise ParseError("box needs three ranges i0:i1 j0:j1 k0:k1", line)
    out = []
    for t in tokens:
        a, _, b = t.partition(":")
        try:
            lo, hi = int(a), int(b or a)
        except ValueError:
            raise ParseError(f"bad range {t!r}", line) from None
        out.append((lo, hi))
    return tuple(out)


_COEFS = ("eps", "sigma", "nu", "zeta", "xi", "tau_eq")


def parse_device_spec(text: str) -> DeviceSpec:
    """``key = value`` lines; repeatable keys: terminal, boundary, coil, region."""
    spec = DeviceSpec("", (0, 0, 0))
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", no)
        key, _, val = (s.strip() for s in line.partition("="))
        key = key.lower()
        tok = val.split()
        if key == "device":
            spec.device = val.lower()
        elif key == "cells":
            if len(tok) != 3:
                raise ParseError("cells takes three integers", no)
            spec.cells = tuple(int(t) for t in tok)
        elif key == "spacing":
            spec.spacing = tuple(parse_value(t, no) for t in tok)
        elif key in _COEFS:
            spec.values[key] = parse_value(val, no)
        elif key == "terminal":
            if len(tok) == 1:
                spec.terminals.append(tok[0].lower())
            else:
                spec.terminals.append(parse_box(tok, no))
        elif key == "boundary":
            if len(tok) != 2 or tok[1].lower() not in ("dirichlet", "neumann"):
                raise ParseError("boundary takes a face and dirichlet|neumann", no)
            spec.boundary[tok[0].lower()] = tok[1].lower()
        elif key == "coil":
            if len(tok) != 5:
                raise ParseError("coil takes a cell box, an axis and a sign", no)
            spec.coils.append((parse_box(tok[:3], no), tok[3].lower(), parse_value(tok[4], no)))
        elif key == "region":
            # region = <coef> i0:i1 j0:j1 k0:k1 : coefficient restricted to the box
            if len(tok) != 4 or tok[0].lower() not in _COEFS:
                raise ParseError("region takes a coefficient name and a cell box", no)
            spec.regions.setdefault(tok[0].lower(), []).append(parse_box(tok[1:], no))
        elif key == "max_cells":
            spec.max_cells = int(val)
        else:
            raise ParseError(f"unknown key {key!r}", no)
    if spec.device not in ("em", "eqs", "mqs"):
        raise ParseError("device must be em, eqs or mqs")
    if min(spec.cells) < 1:
        raise ParseError("cells must be positive")
    return spec
