"""Command line: ``daestruct index | tran | device``.

Exit status is 0 whenever the analysis ran to completion (a "not-covered"
finding included); parse, build and numerical failures exit with 2 and print
a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fit
from .elements import classify
from .errors import DaeStructError
from .mna import index_bound
from .netlist import DeviceSpec, load_netlist, parse_device_spec, write_descriptor
from .report import dumps, with_schema
from .sim import integrate


def run_index(path, tol=None, oracle=True) -> dict:
    nl = load_netlist(path)
    rep = index_bound(nl.system(), tol=tol, oracle=oracle)
    return with_schema({"command": "index", "netlist": Path(path).name, **rep.to_dict()})


def run_tran(path, tend=None, h=None):
    nl = load_netlist(path)
    if tend is None or h is None:
        if nl.tran is None:
            raise DaeStructError("no --tend/--h given and no .tran directive")
        tend = nl.tran[0] if tend is None else tend
        h = nl.tran[1] if h is None else h
    res = integrate(nl.system(), (0.0, tend), h)
    if nl.probe:
        missing = [p for p in nl.probe if p not in res.names]
        if missing:
            raise DaeStructError(f"unknown probe names {missing}")
        cols = [res.names.index(p) for p in nl.probe]
        res.x = res.x[:, cols]
        res.names = list(nl.probe)
    return res


def _coefficient(spec: DeviceSpec, grid, name, default):
    val = spec.values.get(name, default)
    boxes = spec.regions.get(name)
    if name == "tau_eq" and boxes is None and spec.coils:
        boxes = [c[0] for c in spec.coils]
    if boxes is None:
        return val
    arr = np.zeros(grid.cells)
    for (i0, i1), (j0, j1), (k0, k1) in boxes:
        arr[i0:i1 + 1, j0:j1 + 1, k0:k1 + 1] = val
    return arr


def build_device(spec: DeviceSpec) -> fit.DeviceBuild:
    grid = fit.StaggeredGrid(tuple(spec.cells), tuple(spec.spacing))
    defaults = {"eps": 1.0, "sigma": 0.0, "nu": 1.0, "zeta": 1.0, "xi": 1.0, "tau_eq": 0.0}
    mat = fit.MaterialField(**{k: _coefficient(spec, grid, k, v) for k, v in defaults.items()})
    cap = spec.max_cells or fit.MAX_CELLS
    if spec.device == "eqs":
        faces = {f: "neumann" for f in fit.FACES}
        faces["x-"] = "dirichlet"
        faces.update(spec.boundary)
    else:
        faces = {f: "dirichlet" for f in fit.FACES}
    bc = fit.BoundarySpec(faces)
    terms = spec.terminals or (["x-", "x+"] if spec.device == "em" else ["x+"])
    points = [fit.face_terminal(grid, t, bc) if isinstance(t, str) else fit.box_points(grid, t)
              for t in terms]
    if spec.device == "em":
        return fit.build_em_device(grid, mat, points, max_cells=cap)
    if spec.device == "eqs":
        return fit.build_eqs_device(grid, mat, points, bc=bc, max_cells=cap)
    return fit.build_mqs_device(grid, mat, coils=spec.coils, max_cells=cap)


def run_device(path, out_dir) -> dict:
    spec = parse_device_spec(Path(path).read_text(encoding="utf-8"))
    build = build_device(spec)
    rep = classify(build.element)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_descriptor(out / "descriptor.mtx", build.element, [f"device={spec.device}"])
    payload = with_schema({
        "command": "device",
        "device": spec.device,
        "spec": Path(path).name,
        "n_x": build.element.n_x,
        "n_p": build.element.n_p,
        "classification": rep.to_dict(),
        "checks": build.checks,
    })
    (out / "classification.json").write_text(dumps(payload))
    return payload


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="daestruct",
                                description="Structural index analysis of circuit DAEs.")
    sub = p.add_subparsers(dest="cmd", required=True)
    pi = sub.add_parser("index", help="theorem bound, topology and pencil oracle")
    pi.add_argument("netlist")
    pi.add_argument("--json", dest="json_out")
    pi.add_argument("--tol", type=float, default=None)
    pi.add_argument("--oracle", choices=("on", "off"), default="on")
    pt = sub.add_parser("tran", help="implicit Euler transient to CSV")
    pt.add_argument("netlist")
    pt.add_argument("--tend", type=float)
    pt.add_argument("--h", type=float)
    pt.add_argument("--csv", dest="csv_out", required=True)
    pd = sub.add_parser("device", help="build a refined field device")
    pd.add_argument("spec")
    pd.add_argument("--out", required=True)
    return p


def _fail(exc) -> int:
    code = getattr(exc, "code", type(exc).__name__)
    sys.stderr.write(dumps(with_schema({"error": {"code": code, "message": str(exc)}})))
    return 2


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "index":
            payload = run_index(args.netlist, args.tol, args.oracle == "on")
            text = dumps(payload)
            if args.json_out:
                Path(args.json_out).write_text(text)
                print(f"{payload['status']}: theorem_bound {payload['theorem_bound']}, "
                      f"oracle_index {payload['oracle_index']}")
            else:
                sys.stdout.write(text)
        elif args.cmd == "tran":
            res = run_tran(args.netlist, args.tend, args.h)
            res.to_csv(args.csv_out)
            print(f"{len(res.t)} points, h={res.h:.17g}, max step residual "
                  f"{float(res.residuals.max(initial=0.0)):.3g}")
        else:
            payload = run_device(args.spec, args.out)
            c = payload["classification"]
            print(f"{payload['device']}: {c['class']}, strong={c['strong']}, margin={c['margin']}")
    except (DaeStructError, OSError, ValueError) as exc:
        return _fail(exc)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
