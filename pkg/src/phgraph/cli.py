"""Command-line driver: ``phg check|sparsity|emit|eval|diff|place|trace``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .algebra import Algebra, Mode, Multivector, ProductKind, Signature, build_algebra
from .autodiff import Evaluator, check_values_against_grades
from .dims import Consistent, collect_constraints, format_unit, mixed_dimension_warnings, solve
from .errors import PhgError, ProgramError
from .grade import GradeSet, Severity
from .kernel import emit_join_kernel, emit_kernel, sparsity_profile, tensor_sparsity
from .mesh import check_boundary_consistency
from .phg import PRODUCT_KINDS, EdgeKind, Phg, saturate
from .place import TargetModel, assign, check_feasibility
from .program import load_program

_SEVERITY_ORDER = {Severity.ERROR: 0, Severity.WARNING: 1, Severity.NOTE: 2}
ADVISORY = "representation: the library defaults to float64 and this tool to exact rationals; keep exact mode for incidence and orientation predicates (posit32 is informational only)"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    line: int = 0
    col: int = 0
    node: Optional[str] = None

    def to_dict(self) -> dict:
        return {"severity": self.severity.value, "code": self.code, "message": self.message, "line": self.line, "col": self.col, "node": self.node}

    def to_text(self, path: str) -> str:
        where = f"{path}:{self.line}:{self.col}" if self.line else path
        return f"{where}: {self.severity.value}[{self.code}]: {self.message}"


@dataclass
class DiagnosticReport:
    path: str
    diagnostics: list[Diagnostic]

    @property
    def has_errors(self) -> bool:
        return any(d.severity is Severity.ERROR for d in self.diagnostics)

    def sorted(self) -> list[Diagnostic]:
        return sorted(self.diagnostics, key=lambda d: (not d.line, d.line, _SEVERITY_ORDER[d.severity]))

    def to_dict(self) -> dict:
        errors = sum(d.severity is Severity.ERROR for d in self.diagnostics)
        warns = sum(d.severity is Severity.WARNING for d in self.diagnostics)
        return {"file": self.path, "errors": errors, "warnings": warns, "diagnostics": [d.to_dict() for d in self.sorted()]}

    def to_text(self) -> str:
        lines = [d.to_text(self.path) for d in self.sorted()]
        errors = sum(d.severity is Severity.ERROR for d in self.diagnostics)
        warns = sum(d.severity is Severity.WARNING for d in self.diagnostics)
        lines.append(f"{errors} error(s), {warns} warning(s)")
        return "\n".join(lines) + "\n"


# -- value files ------------------------------------------------------------------


def parse_scalar(v, mode: Mode):
    if isinstance(v, bool):
        raise ValueError("booleans are not coefficients")
    if mode is Mode.EXACT:
        if isinstance(v, float):
            return Fraction(str(v))
        return Fraction(v)
    return float(Fraction(v)) if isinstance(v, str) else float(v)


def format_scalar(v) -> object:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def parse_value(alg: Algebra, raw, mode: Mode) -> Multivector:
    """A number (scalar), a full coefficient list, {"grade": k, "values": [...]}, or {blade: coeff}."""
    if isinstance(raw, (int, float, str)) and not isinstance(raw, bool):
        return alg.scalar(parse_scalar(raw, mode), mode)
    if isinstance(raw, list):
        return alg.from_list([parse_scalar(v, mode) for v in raw], mode)
    if isinstance(raw, dict) and "grade" in raw and "values" in raw:
        blades = alg.blades_of_grade(int(raw["grade"]))
        vals = raw["values"]
        if len(vals) != len(blades):
            raise ValueError(f"grade {raw['grade']} has {len(blades)} blades, got {len(vals)} values")
        return Multivector(alg, {m: parse_scalar(v, mode) for m, v in zip(blades, vals)}, mode)
    if isinstance(raw, dict):
        return Multivector(alg, {alg.blade_mask(k): parse_scalar(v, mode) for k, v in raw.items()}, mode)
    raise ValueError(f"cannot read a multivector from {raw!r}")


def load_values(alg: Algebra, path: str, mode: Mode) -> dict[str, Multivector]:
    with open(path) as fh:
        data = json.load(fh)
    return {name: parse_value(alg, raw, mode) for name, raw in data.items()}


def value_to_json(x: Multivector) -> dict:
    return {x.algebra.names[m]: format_scalar(v) for m, v in x.coeffs.items()}


def value_to_text(x: Multivector) -> str:
    if not x.coeffs:
        return "0"
    parts = []
    for m, v in x.coeffs.items():
        s = str(format_scalar(v))
        parts.append(s if m == 0 else f"{s}*{x.algebra.names[m]}")
    return " + ".join(parts)


def load_targets(path: str) -> list[TargetModel]:
    with open(path) as fh:
        data = json.load(fh)
    items = data if isinstance(data, list) else data.get("targets", [data])
    return [TargetModel.from_dict(t) for t in items]


# -- commands ---------------------------------------------------------------------


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _node_loc(phg: Phg, nid: int) -> tuple[int, int]:
    return phg.nodes[nid].loc or (0, 0)


def _edge_loc(phg: Phg, eid: int) -> tuple[int, int]:
    return phg.edges[eid].loc or (0, 0)


def run_check(path: str, text: str, values: Optional[dict] = None, targets: Sequence[TargetModel] = (), mode: Mode = Mode.EXACT) -> DiagnosticReport:
    report = DiagnosticReport(path, [])
    add = report.diagnostics.append
    try:
        _, phg = load_program(text)
    except ProgramError as exc:
        add(Diagnostic(Severity.ERROR, exc.code, exc.detail, exc.line, exc.col))
        return report
    try:
        sat = saturate(phg)
    except ValueError as exc:
        add(Diagnostic(Severity.ERROR, "AlgebraMissing", str(exc)))
        return report
    for d in sat.diagnostics:
        name = phg.nodes[d.node].name
        line, col = _node_loc(phg, d.node)
        add(Diagnostic(d.severity, d.code, f"{name}: {d.message}", line, col, name))
    for nid, why in sat.stalled.items():
        if phg.outgoing(nid) or phg.incoming(nid):
            line, col = _node_loc(phg, nid)
            add(Diagnostic(Severity.WARNING, "Stalled", f"{phg.nodes[nid].name}: {why}", line, col, phg.nodes[nid].name))

    constraints = collect_constraints(phg)
    if constraints:
        sol = solve(constraints)
        if isinstance(sol, Consistent):
            for eid, msg in mixed_dimension_warnings(phg, sol):
                line, col = _edge_loc(phg, eid)
                add(Diagnostic(Severity.WARNING, "MixedDimension", msg, line, col))
        else:
            kind, ident = sol.constraint.provenance
            line, col = _edge_loc(phg, ident) if kind == "edge" else _node_loc(phg, ident)
            witness = format_unit(sol.witness, phg.units) if not any(x % 1 for x in sol.witness) else str(sol.witness)
            add(Diagnostic(Severity.ERROR, "DimensionInconsistent",
                           f"constraint #{sol.index} ({sol.constraint.label}, from {kind} {ident}) {sol.reason}; residual {witness}", line, col))

    for md in check_boundary_consistency(phg, values=values):
        line, col = _node_loc(phg, md.nodes[0])
        add(Diagnostic(Severity.WARNING, md.kind.value, md.message, line, col, phg.nodes[md.nodes[0]].name))

    if targets:
        matrix = check_feasibility(phg, targets)
        for gname, row in zip(matrix.groups, matrix.cells):
            for tname, cell in zip(matrix.targets, row):
                if not cell.ok:
                    add(Diagnostic(Severity.ERROR, cell.reason.value, f"group {gname} on {tname}: {cell.detail}"))
    note = ADVISORY if mode is Mode.EXACT else ADVISORY + "; running in float mode now"
    add(Diagnostic(Severity.NOTE, "Representation", note))
    return report


def _emit_for(phg: Phg, target: str, fused: bool):
    nid = phg.resolve(target)
    saturate(phg)
    edges = phg.incoming(nid)
    if not edges:
        raise PhgError(f"{target!r} is not produced by an operation edge")
    e = edges[0]
    alg = phg.algebra
    src = [phg.nodes[s].grades for s in e.sources]
    if e.kind is EdgeKind.JOIN and all(g == GradeSet.of([1]) for g in src):
        return emit_join_kernel(alg, len(src) - 1)
    if e.kind in PRODUCT_KINDS:
        return emit_kernel(alg, PRODUCT_KINDS[e.kind], src[0], src[1], fused=fused)
    raise PhgError(f"edge into {target!r} ({e.kind.value}) has no kernel form")


def _print_values(phg: Phg, values: dict[int, Multivector], fmt: str, out) -> None:
    if fmt == "json":
        json.dump({phg.nodes[n].name: value_to_json(v) for n, v in values.items()}, out, indent=2, sort_keys=False)
        out.write("\n")
    else:
        for n, v in values.items():
            out.write(f"{phg.nodes[n].name} = {value_to_text(v)}\n")


def _bind(phg: Phg, path: str, mode: Mode) -> dict[int, Multivector]:
    vals = load_values(phg.algebra, path, mode)
    bound = {phg.resolve(k): v for k, v in vals.items()}
    check_values_against_grades(phg, bound)
    return bound


def _parse_triple(text: str) -> tuple[int, int, int]:
    parts = text.replace(" ", "").split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected p,q,r")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("expected integers p,q,r") from None


def _parse_pair(text: str) -> tuple[int, int]:
    parts = text.replace(" ", "").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two grades p,q")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError("expected integer grades") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=["float", "exact"], default=argparse.SUPPRESS)
    common.add_argument("--format", choices=["text", "json"], default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="phg", description="Program hypergraph toolkit for Clifford-algebra programs.")
    p.add_argument("--mode", choices=["float", "exact"], default="exact", help="numeric mode (default: exact)")
    p.add_argument("--format", choices=["text", "json"], default="text", help="output format")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="static diagnostics for a program")
    c.add_argument("file")
    c.add_argument("--inputs", help="value file enabling value-level mesh checks")
    c.add_argument("--target", action="append", default=[], help="target config for feasibility checks")

    s = sub.add_parser("sparsity", parents=[common], help="sparsity profile of a product")
    s.add_argument("--algebra", type=_parse_triple, required=True, metavar="P,Q,R")
    s.add_argument("--kind", choices=[k.value for k in ProductKind], required=True)
    s.add_argument("--grades", type=_parse_pair, required=True, metavar="P,Q")

    e = sub.add_parser("emit", parents=[common], help="print the kernel for one edge")
    e.add_argument("file")
    e.add_argument("--edge", required=True, help="name of the node the edge produces")
    e.add_argument("--fused", action="store_true", help="contract with muladd")

    v = sub.add_parser("eval", parents=[common], help="evaluate a program")
    v.add_argument("file")
    v.add_argument("--inputs", required=True)
    v.add_argument("--kernels", action="store_true", help="run products through emitted kernels")

    d = sub.add_parser("diff", parents=[common], help="forward-mode directional derivative")
    d.add_argument("file")
    d.add_argument("--inputs", required=True)
    d.add_argument("--direction", required=True)

    pl = sub.add_parser("place", parents=[common], help="feasibility matrix and tile plan")
    pl.add_argument("file")
    pl.add_argument("--target", required=True, action="append")

    t = sub.add_parser("trace", parents=[common], help="saturation firing sequence")
    t.add_argument("file")
    t.add_argument("--order", choices=["fifo", "lifo"], default="fifo")
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    mode = Mode(args.mode)
    fmt = args.format
    try:
        return _dispatch(args, mode, fmt, out)
    except ProgramError as exc:
        sys.stderr.write(f"{getattr(args, 'file', '')}:{exc.line}:{exc.col}: error[{exc.code}]: {exc.detail}\n")
        return 1
    except (PhgError, ValueError, KeyError, OSError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        sys.stderr.write(f"error[{code}]: {exc}\n")
        return 1


def _dispatch(args, mode: Mode, fmt: str, out) -> int:
    cmd = args.command
    if cmd == "sparsity":
        alg = build_algebra(Signature(*args.algebra))
        kind = ProductKind(args.kind)
        prof = sparsity_profile(alg, kind, *args.grades)
        data = prof.as_dict()
        data["tensor_sparsity_pct"] = round(100 * tensor_sparsity(alg, kind), 2)
        if fmt == "json":
            out.write(json.dumps(data, indent=2) + "\n")
        else:
            for k, v in data.items():
                out.write(f"{k}: {v}\n")
        return 0

    text = _read(args.file)
    if cmd == "check":
        values = None
        targets = [t for path in args.target for t in load_targets(path)]
        if args.inputs:
            _, phg = load_program(text)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                values = Evaluator(phg).run(_bind(phg, args.inputs, mode), keep=range(len(phg.nodes)))
        report = run_check(args.file, text, values, targets, mode)
        out.write(json.dumps(report.to_dict(), indent=2) + "\n" if fmt == "json" else report.to_text())
        return 1 if report.has_errors else 0

    _, phg = load_program(text)
    if cmd == "trace":
        rep = saturate(phg, args.order)
        if fmt == "json":
            steps = [
                {"edge": s.edge, "kind": phg.edges[s.edge].kind.value, "target": phg.nodes[s.target].name, "grades": str(s.inferred),
                 "saturated": s.saturated, "round": s.round, "quality": list(s.quality)}
                for s in rep.trace
            ]
            out.write(json.dumps({"initial": list(rep.initial), "steps": steps, "rounds": rep.rounds, "iterations": rep.iterations}, indent=2) + "\n")
        else:
            out.write(f"initial quality {tuple(rep.initial)}\n")
            for i, s in enumerate(rep.trace, 1):
                e = phg.edges[s.edge]
                srcs = ", ".join(phg.nodes[x].name for x in e.sources)
                state = "saturated" if s.saturated else "elaborated"
                out.write(f"step {i} round {s.round}: {e.kind.value}({srcs}) -> {phg.nodes[s.target].name} {s.inferred} {state} quality {tuple(s.quality)}\n")
            out.write(f"rounds {rep.rounds}, iterations {rep.iterations}\n")
        return 0
    if cmd == "emit":
        kir = _emit_for(phg, args.edge, args.fused)
        out.write(json.dumps(kir.to_dict(), indent=2) + "\n" if fmt == "json" else kir.to_text())
        return 0
    if cmd == "eval":
        ev = Evaluator(phg, kernels=args.kernels)
        _print_values(phg, ev.run(_bind(phg, args.inputs, mode)), fmt, out)
        return 0
    if cmd == "diff":
        inputs = _bind(phg, args.inputs, mode)
        direction = {phg.resolve(k): v for k, v in load_values(phg.algebra, args.direction, mode).items()}
        duals = Evaluator(phg).forward(inputs, direction)
        _print_values(phg, {n: d.tangent for n, d in duals.items()}, fmt, out)
        return 0
    if cmd == "place":
        targets = [t for path in args.target for t in load_targets(path)]
        matrix = check_feasibility(phg, targets)
        plans = {}
        failed = not all(c.ok for row in matrix.cells for c in row)
        if not failed:
            for t in targets:
                try:
                    plans[t.name] = assign(phg, t)
                except PhgError as exc:
                    failed = True
                    plans[t.name] = exc
        if fmt == "json":
            doc = {"feasibility": matrix.to_dict(), "plans": {k: (v.to_dict(phg) if not isinstance(v, Exception) else {"error": str(v)}) for k, v in plans.items()}}
            out.write(json.dumps(doc, indent=2) + "\n")
        else:
            out.write("feasibility\n")
            for g, row in zip(matrix.groups, matrix.cells):
                for t, cell in zip(matrix.targets, row):
                    out.write(f"  {g} on {t}: {cell}\n")
            for name, plan in plans.items():
                out.write(f"error: {plan}\n" if isinstance(plan, Exception) else plan.to_text(phg))
        return 1 if failed else 0
    raise AssertionError(cmd)


if __name__ == "__main__":
    sys.exit(main())
