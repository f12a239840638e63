"""Line-oriented program format: parse, build a Phg, serialize back.

    algebra 3 0 1
    units m kg s
    target npu
    node p1 mv grade=1
    node area scalar unit=m^2
    edge join(p1, p2, p3) -> face
    edge norm(face) -> area ideal scale=1/2
    colocate tile (a, b, c, d) -> out routes=a>b,a>c dma=a:d sync=d footprint=a:16

Nodes may be referenced before they are declared; references resolve after
the whole file has been read.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .algebra import Signature, build_algebra
from .dims import parse_unit
from .errors import PhgError, ProgramError
from .phg import EdgeKind, Phg, Sigma, ValueKind

KEYWORDS = ("algebra", "units", "target", "node", "edge", "colocate")
_NAME = r"[A-Za-z_][A-Za-z_0-9]*"
_EDGE = re.compile(rf"^\s*({_NAME})\s*\(([^)]*)\)\s*->\s*({_NAME})\s*(.*)$")
_GROUP = re.compile(rf"^\s*({_NAME})\s*\(([^)]*)\)\s*->\s*({_NAME})\s*(.*)$")
_IDENT = re.compile(rf"^{_NAME}$")


@dataclass
class NodeDecl:
    name: str
    kind: str = "mv"
    grades: Optional[tuple[int, ...]] = None
    unit: Optional[str] = None
    coeffect: Optional[str] = None
    sigma: Optional[str] = None
    line: int = field(default=0, compare=False)


@dataclass
class EdgeDecl:
    kind: str
    sources: tuple[str, ...]
    target: str
    options: tuple[tuple[str, Optional[str]], ...] = ()
    line: int = field(default=0, compare=False)


@dataclass
class GroupDecl:
    name: str
    members: tuple[str, ...]
    target: str
    routes: tuple[tuple[str, str], ...] = ()
    dma: tuple[tuple[str, str], ...] = ()
    sync: tuple[str, ...] = ()
    footprint: tuple[tuple[str, int], ...] = ()
    mode: str = "block"
    line: int = field(default=0, compare=False)


@dataclass
class ProgramFile:
    algebra: Optional[tuple[int, int, int]] = None
    units: tuple[str, ...] = ()
    targets: tuple[str, ...] = ()
    nodes: list[NodeDecl] = field(default_factory=list)
    edges: list[EdgeDecl] = field(default_factory=list)
    groups: list[GroupDecl] = field(default_factory=list)
    algebra_line: int = field(default=0, compare=False)


def _col(raw: str, token: str) -> int:
    i = raw.find(token)
    return i + 1 if i >= 0 else 1


def _options(text: str, lineno: int, raw: str) -> list[tuple[str, Optional[str]]]:
    out = []
    for tok in text.split():
        key, eq, val = tok.partition("=")
        if not _IDENT.match(key) or (eq and not val):
            raise ProgramError("SyntaxError", f"bad option {tok!r}", lineno, _col(raw, tok))
        out.append((key, val if eq else None))
    return out


def _names(text: str, lineno: int, raw: str) -> tuple[str, ...]:
    parts = [p.strip() for p in text.split(",")] if text.strip() else []
    for p in parts:
        if not _IDENT.match(p):
            raise ProgramError("SyntaxError", f"bad node name {p!r}", lineno, _col(raw, p) if p else 1)
    return tuple(parts)


def _pairs(val: str, sep: str, lineno: int, raw: str) -> tuple[tuple[str, str], ...]:
    out = []
    for item in val.split(","):
        a, s, b = item.partition(sep)
        if not s or not _IDENT.match(a) or not _IDENT.match(b):
            raise ProgramError("SyntaxError", f"expected NAME{sep}NAME, got {item!r}", lineno, _col(raw, item))
        out.append((a, b))
    return tuple(out)


def parse_program(text: str) -> ProgramFile:
    """Read the program text into declarations; no cross-references are checked here."""
    pf = ProgramFile()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        kw, _, rest = line.strip().partition(" ")
        rest = rest.strip()
        if kw not in KEYWORDS:
            raise ProgramError("UnknownKeyword", f"unknown keyword {kw!r}", lineno, _col(raw, kw))
        if kw == "algebra":
            if pf.algebra is not None:
                raise ProgramError("AlgebraMismatch", "one algebra per program; a second declaration was found", lineno, 1)
            parts = rest.replace(",", " ").split()
            if len(parts) != 3 or not all(p.isdigit() for p in parts):
                raise ProgramError("SyntaxError", "algebra takes three non-negative integers p q r", lineno, _col(raw, rest) if rest else 1)
            pf.algebra = tuple(int(p) for p in parts)
            pf.algebra_line = lineno
        elif kw == "units":
            names = tuple(rest.split())
            for n in names:
                if not _IDENT.match(n):
                    raise ProgramError("SyntaxError", f"bad unit name {n!r}", lineno, _col(raw, n))
            pf.units = pf.units + names
        elif kw == "target":
            for n in rest.split():
                if not _IDENT.match(n):
                    raise ProgramError("SyntaxError", f"bad target name {n!r}", lineno, _col(raw, n))
            pf.targets = pf.targets + tuple(rest.split())
        elif kw == "node":
            toks = rest.split()
            if not toks or not _IDENT.match(toks[0]):
                raise ProgramError("SyntaxError", "node needs a name", lineno, len(kw) + 2)
            decl = NodeDecl(toks[0], line=lineno)
            opts = toks[1:]
            if opts and "=" not in opts[0]:
                decl.kind = opts.pop(0)
                if decl.kind not in ("mv", "scalar"):
                    raise ProgramError("SyntaxError", f"node kind must be mv or scalar, got {decl.kind!r}", lineno, _col(raw, decl.kind))
            for key, val in _options(" ".join(opts), lineno, raw):
                if val is None:
                    raise ProgramError("SyntaxError", f"option {key!r} needs a value", lineno, _col(raw, key))
                if key == "grade":
                    try:
                        decl.grades = tuple(int(g) for g in val.split(","))
                    except ValueError:
                        raise ProgramError("SyntaxError", f"bad grade list {val!r}", lineno, _col(raw, val)) from None
                elif key in ("unit", "coeffect", "sigma"):
                    setattr(decl, key, val)
                else:
                    raise ProgramError("SyntaxError", f"unknown node option {key!r}", lineno, _col(raw, key))
            pf.nodes.append(decl)
        elif kw == "edge":
            m = _EDGE.match(rest)
            if not m:
                raise ProgramError("SyntaxError", "expected: edge KIND(src, ...) -> target [options]", lineno, len(kw) + 2)
            kind = m.group(1)
            try:
                EdgeKind(kind)
            except ValueError:
                raise ProgramError("UnknownKeyword", f"unknown edge kind {kind!r}", lineno, _col(raw, kind)) from None
            sources = _names(m.group(2), lineno, raw)
            pf.edges.append(EdgeDecl(kind, sources, m.group(3), tuple(_options(m.group(4), lineno, raw)), lineno))
        else:
            m = _GROUP.match(rest)
            if not m:
                raise ProgramError("SyntaxError", "expected: colocate NAME (member, ...) -> target [options]", lineno, len(kw) + 2)
            g = GroupDecl(m.group(1), _names(m.group(2), lineno, raw), m.group(3), line=lineno)
            for key, val in _options(m.group(4), lineno, raw):
                if val is None:
                    raise ProgramError("SyntaxError", f"option {key!r} needs a value", lineno, _col(raw, key))
                if key == "routes":
                    g.routes = _pairs(val, ">", lineno, raw)
                elif key == "dma":
                    g.dma = _pairs(val, ":", lineno, raw)
                elif key == "sync":
                    g.sync = tuple(val.split(","))
                elif key == "footprint":
                    fp = []
                    for item in val.split(","):
                        a, sep, b = item.partition(":")
                        if not sep or not _IDENT.match(a) or not b.isdigit():
                            raise ProgramError("SyntaxError", f"expected NAME:KB, got {item!r}", lineno, _col(raw, item))
                        fp.append((a, int(b)))
                    g.footprint = tuple(fp)
                elif key == "mode":
                    if val not in ("block", "column", "tile"):
                        raise ProgramError("SyntaxError", f"mode must be block, column or tile, got {val!r}", lineno, _col(raw, val))
                    g.mode = val
                else:
                    raise ProgramError("SyntaxError", f"unknown colocate option {key!r}", lineno, _col(raw, key))
            pf.groups.append(g)
    return pf


def _payload(e: EdgeDecl, targets: tuple[str, ...]) -> tuple[dict, Optional[int]]:
    payload: dict = {}
    reach = None
    for key, val in e.options:
        if key == "reach":
            reach = 0
            for name in (val or "").split(","):
                if name not in targets:
                    raise ProgramError("UnresolvedReference", f"unknown target {name!r} in reach", e.line, 1)
                reach |= 1 << targets.index(name)
        elif e.kind == "norm" and key == "ideal":
            payload["ideal"] = val is None or val.lower() in ("1", "true", "yes")
        elif e.kind == "norm" and key == "scale":
            try:
                payload["scale"] = Fraction(val)
            except (TypeError, ValueError, ZeroDivisionError):
                raise ProgramError("SyntaxError", f"bad scale {val!r}", e.line, 1) from None
        elif e.kind == "select" and key == "grade":
            if val is None or not val.lstrip("-").isdigit():
                raise ProgramError("SyntaxError", "select needs grade=K", e.line, 1)
            payload["grade"] = int(val)
        elif e.kind == "custom":
            payload[key] = val if val is not None else True
        else:
            raise ProgramError("SyntaxError", f"edge kind {e.kind!r} has no option {key!r}", e.line, 1)
    return payload, reach


def build_phg(pf: ProgramFile) -> Phg:
    """Validated Phg for a parsed program; module errors come back as located ProgramErrors."""
    alg = None
    if pf.algebra is not None:
        try:
            alg = build_algebra(Signature(*pf.algebra))
        except (PhgError, ValueError) as exc:
            raise ProgramError(getattr(exc, "code", "SyntaxError"), str(exc), pf.algebra_line, 1) from None
    phg = Phg(alg, pf.units, pf.targets)
    for n in pf.nodes:
        try:
            unit = parse_unit(n.unit, pf.units) if n.unit is not None else None
        except ValueError as exc:
            raise ProgramError("SyntaxError", str(exc), n.line, 1) from None
        if n.name in phg._by_name:
            raise ProgramError("DuplicateName", f"node {n.name!r} declared twice", n.line, 1)
        try:
            phg.add_node(n.name, ValueKind(n.kind), n.grades, unit, n.coeffect, Sigma(n.sigma) if n.sigma else Sigma.FRESH, (n.line, 1))
        except ValueError as exc:
            raise ProgramError("SyntaxError", str(exc), n.line, 1) from None
        except PhgError as exc:
            raise ProgramError(exc.code, str(exc), n.line, 1) from None

    def resolve(name: str, line: int) -> int:
        if name not in phg._by_name:
            raise ProgramError("UnresolvedReference", f"no node named {name!r}", line, 1)
        return phg._by_name[name]

    for e in pf.edges:
        src = [resolve(s, e.line) for s in e.sources]
        tgt = resolve(e.target, e.line)
        payload, reach = _payload(e, pf.targets)
        try:
            phg.add_hyperedge(e.kind, src, tgt, payload, reach, (e.line, 1))
        except PhgError as exc:
            raise ProgramError(exc.code, str(exc), e.line, 1) from None
        except ValueError as exc:
            raise ProgramError("SyntaxError", str(exc), e.line, 1) from None
    for g in pf.groups:
        members = [resolve(m, g.line) for m in g.members]
        tgt = resolve(g.target, g.line)
        for a, b in g.routes + g.dma:
            resolve(a, g.line), resolve(b, g.line)
        for m in g.sync:
            resolve(m, g.line)
        for m, _ in g.footprint:
            resolve(m, g.line)
        payload = {
            "name": g.name,
            "routes": [list(p) for p in g.routes],
            "dma": [list(p) for p in g.dma],
            "sync": list(g.sync),
            "footprint": dict(g.footprint),
            "mode": g.mode,
        }
        try:
            phg.add_hyperedge(EdgeKind.COLOCATION, members, tgt, payload, None, (g.line, 1))
        except PhgError as exc:
            raise ProgramError(exc.code, str(exc), g.line, 1) from None
    return phg


def load_program(text: str) -> tuple[ProgramFile, Phg]:
    pf = parse_program(text)
    return pf, build_phg(pf)


def serialize_program(pf: ProgramFile) -> str:
    lines = []
    if pf.algebra is not None:
        lines.append("algebra " + " ".join(map(str, pf.algebra)))
    if pf.units:
        lines.append("units " + " ".join(pf.units))
    if pf.targets:
        lines.append("target " + " ".join(pf.targets))
    for n in pf.nodes:
        parts = ["node", n.name, n.kind]
        if n.grades is not None:
            parts.append("grade=" + ",".join(map(str, n.grades)))
        for key in ("unit", "coeffect", "sigma"):
            if getattr(n, key) is not None:
                parts.append(f"{key}={getattr(n, key)}")
        lines.append(" ".join(parts))
    for e in pf.edges:
        opts = " ".join(k if v is None else f"{k}={v}" for k, v in e.options)
        lines.append(f"edge {e.kind}({', '.join(e.sources)}) -> {e.target}" + (f" {opts}" if opts else ""))
    for g in pf.groups:
        parts = [f"colocate {g.name} ({', '.join(g.members)}) -> {g.target}"]
        if g.routes:
            parts.append("routes=" + ",".join(f"{a}>{b}" for a, b in g.routes))
        if g.dma:
            parts.append("dma=" + ",".join(f"{a}:{b}" for a, b in g.dma))
        if g.sync:
            parts.append("sync=" + ",".join(g.sync))
        if g.footprint:
            parts.append("footprint=" + ",".join(f"{a}:{b}" for a, b in g.footprint))
        if g.mode != "block":
            parts.append(f"mode={g.mode}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")
