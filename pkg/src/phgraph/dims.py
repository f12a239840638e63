"""Physical-dimension constraints over Z^n and their integer elimination solver.

Every node carries an exponent vector over the program's base units.  Edges
emit linear equations between node vectors; :func:`solve` adds them one at a
time to a fully reduced fraction-free echelon form, so the first equation that
reduces to ``0 = nonzero`` is the first inconsistent one in insertion order.

Homogeneous convention: undeclared input nodes (PGA points, rotors, ...) are
dimensionless.  Physical scale enters where coordinates are extracted: every
norm edge owns an auxiliary ``scale`` variable, so ``area = norm(face)``
reads ``area = face + scale``.  Declaring a unit on any input overrides this.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from math import gcd
from typing import Hashable, Sequence, Union

from .phg import EdgeKind, Phg, PRODUCT_KINDS

UnitVector = tuple[int, ...]
Var = Hashable

_FACTOR = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\^\s*(-?\d+))?\s*")


def parse_unit(expr: str, base: Sequence[str]) -> UnitVector:
    """``"kg*m/s^2"`` -> exponent vector over ``base``; ``"1"`` is dimensionless."""
    vec = [0] * len(base)
    expr = expr.strip()
    if expr in ("", "1"):
        return tuple(vec)
    sign = 1
    pos = 0
    while pos < len(expr):
        m = _FACTOR.match(expr, pos)
        if not m or m.end() == pos:
            raise ValueError(f"bad unit expression {expr!r} at {pos}")
        name, power = m.group(1), int(m.group(2) or 1)
        if name not in base:
            raise ValueError(f"unknown base unit {name!r} (declared: {', '.join(base) or 'none'})")
        vec[base.index(name)] += sign * power
        pos = m.end()
        if pos < len(expr):
            if expr[pos] == "*":
                sign = 1
            elif expr[pos] == "/":
                sign = -1
            else:
                raise ValueError(f"bad unit expression {expr!r} at {pos}")
            pos += 1
    return tuple(vec)


def format_unit(vec: UnitVector, base: Sequence[str]) -> str:
    num = [f"{b}^{e}" if e != 1 else b for b, e in zip(base, vec) if e > 0]
    den = [f"{b}^{-e}" if e != -1 else b for b, e in zip(base, vec) if e < 0]
    out = "*".join(num) or "1"
    if den:
        out += "/" + "/".join(den)
    return out


def unit_mul(a: UnitVector, b: UnitVector) -> UnitVector:
    return tuple(x + y for x, y in zip(a, b))


def unit_div(a: UnitVector, b: UnitVector) -> UnitVector:
    return tuple(x - y for x, y in zip(a, b))


@dataclass(frozen=True)
class DimConstraint:
    """sum(coeff * dim(var)) == rhs."""

    coeffs: tuple[tuple[Var, int], ...]
    rhs: UnitVector
    provenance: object
    label: str = ""


@dataclass
class Consistent:
    assignment: dict
    free: list
    underdetermined: list
    ok: bool = field(default=True, init=False)


@dataclass
class Inconsistent:
    constraint: DimConstraint
    index: int
    witness: UnitVector
    reason: str
    ok: bool = field(default=False, init=False)


DimSolution = Union[Consistent, Inconsistent]


def _var_name(phg: Phg, v) -> str:
    if isinstance(v, tuple):
        return f"scale[{phg.nodes[phg.edges[v[1]].target].name}]"
    return phg.nodes[v].name


def collect_constraints(phg: Phg) -> list[DimConstraint]:
    """Node declarations first (in node order), then one group per edge."""
    n = len(phg.units)
    if n == 0:
        return []
    zero = (0,) * n
    out: list[DimConstraint] = []
    for node in phg.nodes:
        if node.unit is not None:
            out.append(DimConstraint(((node.id, 1),), node.unit, ("node", node.id), f"{node.name} declared"))
        elif phg.is_input(node.id):
            out.append(DimConstraint(((node.id, 1),), zero, ("default", node.id), f"{node.name} dimensionless input"))
    for e in phg.edges:
        t = e.target
        name = phg.nodes[t].name
        if e.kind in PRODUCT_KINDS or e.kind is EdgeKind.JOIN:
            terms: dict = {t: 1}
            for s in e.sources:
                terms[s] = terms.get(s, 0) - 1
            out.append(DimConstraint(tuple(terms.items()), zero, ("edge", e.id), f"{name} = {e.kind.value}(...)"))
        elif e.kind is EdgeKind.NORM:
            scale = ("scale", e.id)
            out.append(DimConstraint(((t, 1), (e.sources[0], -1), (scale, -1)), zero, ("edge", e.id), f"{name} = norm(...) * scale"))
        elif e.kind is EdgeKind.SANDWICH:
            rotor, x = e.sources
            out.append(DimConstraint(((rotor, 1),), zero, ("edge", e.id), f"rotor of {name} dimensionless"))
            out.append(DimConstraint(((t, 1), (x, -1)), zero, ("edge", e.id), f"{name} = sandwich(...)"))
        elif e.kind is EdgeKind.GRADE_SELECT:
            out.append(DimConstraint(((t, 1), (e.sources[0], -1)), zero, ("edge", e.id), f"{name} = select(...)"))
    return [c for c in out if any(k for _, k in c.coeffs) or any(c.rhs)]


def _normalize(row: dict, rhs: list[int]) -> None:
    g = 0
    for v in row.values():
        g = gcd(g, v)
    for v in rhs:
        g = gcd(g, v)
    if g > 1:
        for k in row:
            row[k] //= g
        for i in range(len(rhs)):
            rhs[i] //= g


def solve(constraints: Sequence[DimConstraint]) -> DimSolution:
    """Fraction-free incremental elimination over the integers."""
    order: dict = {}
    rows: list[tuple[dict, list[int], object, int]] = []  # (coeffs, rhs, pivot, source index)
    for idx, c in enumerate(constraints):
        row: dict = {}
        for v, k in c.coeffs:
            order.setdefault(v, len(order))
            row[v] = row.get(v, 0) + k
        row = {v: k for v, k in row.items() if k}
        rhs = list(c.rhs)
        for prow, prhs, pv, _ in rows:
            a = row.get(pv)
            if not a:
                continue
            b = prow[pv]
            for v in set(row) | set(prow):
                val = b * row.get(v, 0) - a * prow.get(v, 0)
                if val:
                    row[v] = val
                else:
                    row.pop(v, None)
            rhs = [b * x - a * y for x, y in zip(rhs, prhs)]
            _normalize(row, rhs)
        if not row:
            if any(rhs):
                return Inconsistent(c, idx, tuple(rhs), "constraint contradicts the ones before it")
            continue
        pv = min(row, key=order.__getitem__)
        if row[pv] < 0:
            row = {v: -k for v, k in row.items()}
            rhs = [-x for x in rhs]
        _normalize(row, rhs)
        for j, (prow, prhs, ppv, src) in enumerate(rows):
            a = prow.get(pv)
            if not a:
                continue
            b = row[pv]
            new = {}
            for v in set(row) | set(prow):
                val = b * prow.get(v, 0) - a * row.get(v, 0)
                if val:
                    new[v] = val
            nrhs = [b * x - a * y for x, y in zip(prhs, rhs)]
            _normalize(new, nrhs)
            rows[j] = (new, nrhs, ppv, src)
        rows.append((row, rhs, pv, idx))

    pivots = {pv for _, _, pv, _ in rows}
    free = sorted((v for v in order if v not in pivots), key=order.__getitem__)
    n = len(constraints[0].rhs) if constraints else 0
    assignment = {v: (0,) * n for v in free}
    underdetermined = list(free)
    for row, rhs, pv, src in rows:
        k = row[pv]
        if any(x % k for x in rhs):
            return Inconsistent(constraints[src], src, tuple(rhs), "requires a fractional exponent")
        assignment[pv] = tuple(x // k for x in rhs)
        if len(row) > 1:
            underdetermined.append(pv)
    assignment = dict(sorted(assignment.items(), key=lambda kv: order[kv[0]]))
    underdetermined.sort(key=order.__getitem__)
    return Consistent(assignment, free, underdetermined)


def satisfies(constraints: Sequence[DimConstraint], assignment: dict) -> bool:
    for c in constraints:
        total = [0] * len(c.rhs)
        for v, k in c.coeffs:
            for i, x in enumerate(assignment[v]):
                total[i] += k * x
        if tuple(total) != tuple(c.rhs):
            return False
    return True


def describe(phg: Phg, solution: DimSolution) -> str:
    if isinstance(solution, Inconsistent):
        return f"inconsistent at constraint #{solution.index} ({solution.constraint.label}): {solution.reason}"
    parts = [f"{_var_name(phg, v)}: {format_unit(u, phg.units)}" for v, u in solution.assignment.items()]
    return "consistent; " + ", ".join(parts)


def mixed_dimension_warnings(phg: Phg, solution: DimSolution) -> list[tuple[int, str]]:
    """GP edges whose target has several grades and whose sources carry different dimensions."""
    if not isinstance(solution, Consistent):
        return []
    out = []
    for e in phg.edges:
        if e.kind is not EdgeKind.GP:
            continue
        if len(phg.nodes[e.target].grades) < 2:
            continue
        dims = {solution.assignment.get(s) for s in e.sources}
        if len(dims) > 1:
            out.append((e.id, f"mixed-grade product {phg.nodes[e.target].name} combines sources of different dimension"))
    return out
