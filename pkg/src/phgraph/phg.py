"""Program hypergraph of annotated nodes and directed hyperedges, with a saturation fixpoint."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence, Union

from .algebra import Algebra, ProductKind
from .errors import ArityMismatch, CycleIntroduced, GradeOutOfRange, UnknownNode
from .grade import (
    STRUCTURAL_ZERO,
    UNKNOWN,
    GradeDiagnostic,
    GradeSet,
    Severity,
    check_grades,
    join_grades,
    table_grades,
)


class Activation(enum.IntEnum):
    FRESH = 0
    ELABORATED = 1
    SATURATED = 2


class Sigma(str, enum.Enum):
    """Declared liveness flag; stored, never driven by saturation."""

    LIVE = "live"
    LATENT = "latent"
    FRESH = "fresh"


class ValueKind(str, enum.Enum):
    MULTIVECTOR = "mv"
    SCALAR = "scalar"


class EdgeKind(str, enum.Enum):
    GP = "gp"
    OUTER = "outer"
    INNER = "inner"
    REGRESSIVE = "regressive"
    SANDWICH = "sandwich"
    JOIN = "join"
    GRADE_SELECT = "select"
    NORM = "norm"
    COLOCATION = "colocate"
    TRANSFER = "transfer"
    SYNC_BARRIER = "sync"
    CUSTOM = "custom"


PRODUCT_KINDS = {
    EdgeKind.GP: ProductKind.GP,
    EdgeKind.OUTER: ProductKind.OUTER,
    EdgeKind.INNER: ProductKind.INNER,
    EdgeKind.REGRESSIVE: ProductKind.REGRESSIVE,
}

INFERENCE_KINDS = frozenset(PRODUCT_KINDS) | {
    EdgeKind.SANDWICH,
    EdgeKind.JOIN,
    EdgeKind.GRADE_SELECT,
    EdgeKind.NORM,
}

# (min, max) source count; None = unbounded
ARITY = {
    EdgeKind.GP: (2, 2),
    EdgeKind.OUTER: (2, 2),
    EdgeKind.INNER: (2, 2),
    EdgeKind.REGRESSIVE: (2, 2),
    EdgeKind.SANDWICH: (2, 2),
    EdgeKind.JOIN: (2, None),
    EdgeKind.GRADE_SELECT: (1, 1),
    EdgeKind.NORM: (1, 1),
    EdgeKind.TRANSFER: (1, 1),
    EdgeKind.COLOCATION: (1, None),
    EdgeKind.SYNC_BARRIER: (1, None),
    EdgeKind.CUSTOM: (1, None),
}


@dataclass
class PhgNode:
    id: int
    name: str
    kind: ValueKind = ValueKind.MULTIVECTOR
    declared: GradeSet = UNKNOWN
    unit: Optional[tuple[int, ...]] = None
    coeffect: Optional[str] = None
    sigma: Sigma = Sigma.FRESH
    loc: Optional[tuple[int, int]] = None
    activation: Activation = Activation.FRESH
    grades: GradeSet = UNKNOWN

    @property
    def declared_grades(self) -> GradeSet:
        if self.kind is ValueKind.SCALAR:
            return GradeSet.of([0])
        return self.declared


@dataclass
class Hyperedge:
    id: int
    kind: EdgeKind
    sources: tuple[int, ...]
    target: int
    payload: dict = field(default_factory=dict)
    reach: int = 0
    loc: Optional[tuple[int, int]] = None

    @property
    def infers(self) -> bool:
        return self.kind in INFERENCE_KINDS


class Phg:
    """Nodes and hyperedges with eager validation.

    The relation {s -> t : s in sources(f)} is kept acyclic on every insert.
    """

    def __init__(self, algebra: Optional[Algebra] = None, units: Sequence[str] = (), targets: Sequence[str] = ()):
        self.algebra = algebra
        self.units = tuple(units)
        self.targets = tuple(targets)
        self.nodes: list[PhgNode] = []
        self.edges: list[Hyperedge] = []
        self._by_name: dict[str, int] = {}
        self._out: list[list[int]] = []
        self._in: list[list[int]] = []

    # -- construction ---------------------------------------------------------

    def add_node(
        self,
        name: str,
        kind: Union[ValueKind, str] = ValueKind.MULTIVECTOR,
        grades: Union[GradeSet, Iterable[int], None] = None,
        unit: Optional[Sequence[int]] = None,
        coeffect: Optional[str] = None,
        sigma: Union[Sigma, str] = Sigma.FRESH,
        loc: Optional[tuple[int, int]] = None,
    ) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate node name {name!r}")
        kind = ValueKind(kind)
        if grades is None:
            gs = UNKNOWN
        elif isinstance(grades, GradeSet):
            gs = grades
        else:
            gs = GradeSet.of(grades)
        if self.algebra is not None and gs.max() > self.algebra.d:
            raise GradeOutOfRange(f"node {name!r} declares grade {gs.max()} > d={self.algebra.d}")
        if unit is not None:
            unit = tuple(int(u) for u in unit)
            if len(unit) != len(self.units):
                raise ValueError(f"node {name!r}: unit vector has {len(unit)} entries, program declares {len(self.units)}")
        nid = len(self.nodes)
        self.nodes.append(PhgNode(nid, name, kind, gs, unit, coeffect, Sigma(sigma), loc))
        self._by_name[name] = nid
        self._out.append([])
        self._in.append([])
        return nid

    def add_hyperedge(
        self,
        kind: Union[EdgeKind, str],
        sources: Sequence[Union[int, str]],
        target: Union[int, str],
        payload: Optional[dict] = None,
        reach: Optional[int] = None,
        loc: Optional[tuple[int, int]] = None,
    ) -> int:
        kind = EdgeKind(kind)
        src = tuple(self.resolve(s) for s in sources)
        tgt = self.resolve(target)
        lo, hi = ARITY[kind]
        if len(src) < lo or (hi is not None and len(src) > hi):
            want = f"{lo}" if lo == hi else f"at least {lo}"
            raise ArityMismatch(f"{kind.value} takes {want} source(s), got {len(src)}", loc=loc)
        if tgt in src:
            raise CycleIntroduced(f"target {self.nodes[tgt].name!r} is also a source", loc=loc)
        payload = dict(payload or {})
        if kind is EdgeKind.GRADE_SELECT:
            k = payload.get("grade")
            if k is None:
                raise ValueError("select edge needs a 'grade' payload")
            if self.algebra is not None and not 0 <= int(k) <= self.algebra.d:
                raise GradeOutOfRange(f"select grade {k} outside [0, {self.algebra.d}]")
            payload["grade"] = int(k)
        if kind is EdgeKind.NORM:
            payload["ideal"] = bool(payload.get("ideal", False))
            payload["scale"] = Fraction(payload.get("scale", 1))
        if self._out[tgt] and self._reaches(tgt, set(src)):
            raise CycleIntroduced(f"edge into {self.nodes[tgt].name!r} closes a cycle", loc=loc)
        width = len(self.targets)
        if reach is None:
            reach = (1 << width) - 1
        elif reach >> width:
            raise ValueError(f"reachability bits {reach:b} wider than {width} configured targets")
        eid = len(self.edges)
        self.edges.append(Hyperedge(eid, kind, src, tgt, payload, reach, loc))
        for s in set(src):
            self._out[s].append(eid)
        self._in[tgt].append(eid)
        return eid

    def _reaches(self, start: int, goals: set[int]) -> bool:
        seen, stack = {start}, [start]
        while stack:
            n = stack.pop()
            if n in goals:
                return True
            for e in self._out[n]:
                t = self.edges[e].target
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return False

    # -- lookup -------------------------------------------------------------------

    def resolve(self, ref: Union[int, str]) -> int:
        if isinstance(ref, str):
            try:
                return self._by_name[ref]
            except KeyError:
                raise UnknownNode(f"no node named {ref!r}") from None
        if not 0 <= ref < len(self.nodes):
            raise UnknownNode(f"no node with id {ref}")
        return ref

    def node(self, ref: Union[int, str]) -> PhgNode:
        return self.nodes[self.resolve(ref)]

    def incoming(self, nid: int, inference_only: bool = True) -> list[Hyperedge]:
        return [self.edges[e] for e in self._in[nid] if not inference_only or self.edges[e].infers]

    def outgoing(self, nid: int, inference_only: bool = True) -> list[Hyperedge]:
        return [self.edges[e] for e in self._out[nid] if not inference_only or self.edges[e].infers]

    def is_input(self, nid: int) -> bool:
        return not self.incoming(nid)

    def topological_order(self) -> list[int]:
        """Nodes ordered so every inference-edge source precedes its target."""
        indeg = [0] * len(self.nodes)
        for e in self.edges:
            if e.infers:
                indeg[e.target] += len(set(e.sources))
        ready = deque(n for n in range(len(self.nodes)) if indeg[n] == 0)
        order = []
        while ready:
            n = ready.popleft()
            order.append(n)
            for e in self.outgoing(n):
                indeg[e.target] -= 1
                if indeg[e.target] == 0:
                    ready.append(e.target)
        return order

    # -- binary embedding ---------------------------------------------------------

    def binary_view(self) -> list[tuple[int, int, EdgeKind, dict, int]]:
        """Plain directed edge list; only valid when every hyperedge has one source."""
        out = []
        for e in self.edges:
            if len(e.sources) != 1:
                raise ArityMismatch(f"edge {e.id} has {len(e.sources)} sources; not a binary edge")
            out.append((e.sources[0], e.target, e.kind, dict(e.payload), e.reach))
        return out

    @classmethod
    def from_binary_view(cls, template: "Phg", edges) -> "Phg":
        """Rebuild a PHG from ``template``'s nodes and a plain edge list."""
        g = cls(template.algebra, template.units, template.targets)
        for n in template.nodes:
            g.add_node(n.name, n.kind, n.declared, n.unit, n.coeffect, n.sigma, n.loc)
        for s, t, kind, payload, reach in edges:
            g.add_hyperedge(kind, [s], t, payload, reach)
        return g


class Quality(NamedTuple):
    """Information-quality proxy counting saturated nodes and known grade sets, plus fired edges as a tiebreak."""

    saturated: int
    known: int
    fired: int


@dataclass(frozen=True)
class TraceStep:
    edge: int
    target: int
    inferred: GradeSet
    saturated: bool
    round: int
    quality: Quality


@dataclass
class SaturationReport:
    iterations: int
    rounds: int
    grades: dict[int, GradeSet]
    activation: dict[int, Activation]
    trace: list[TraceStep]
    stalled: dict[int, str]
    diagnostics: list[GradeDiagnostic]
    initial: Quality

    @property
    def fired(self) -> int:
        return len(self.trace)

    def qualities(self) -> list[Quality]:
        return [self.initial] + [s.quality for s in self.trace]


def _edge_grades(phg: Phg, e: Hyperedge, src: list[GradeSet]) -> tuple[GradeSet, Optional[str]]:
    """Inferred target grade set and an optional warning message."""
    if any(g.zero for g in src):
        return STRUCTURAL_ZERO, "consumes a provably zero value"
    alg = phg.algebra
    kind = e.kind
    if alg is None and kind is not EdgeKind.NORM:
        raise ValueError(f"edge {e.id} ({kind.value}) needs an algebra declaration")
    if kind in PRODUCT_KINDS:
        return table_grades(alg, PRODUCT_KINDS[kind], src[0], src[1]), None
    if kind is EdgeKind.SANDWICH:
        rotor, x = src
        if all(g % 2 == 0 for g in rotor):
            return x, None
        inner = table_grades(alg, ProductKind.GP, rotor, x)
        return table_grades(alg, ProductKind.GP, inner, rotor), "sandwich with odd-grade rotor is not grade preserving"
    if kind is EdgeKind.JOIN:
        seen = set()
        for s, g in zip(e.sources, src):
            if s in seen and len(g) == 1 and g.max() % 2 == 1:
                return STRUCTURAL_ZERO, "join repeats an odd-grade factor"
            seen.add(s)
        if all(len(g) == 1 for g in src):
            return join_grades([g.max() for g in src], alg.d), None
        acc = src[0]
        for g in src[1:]:
            acc = table_grades(alg, ProductKind.OUTER, acc, g)
        return acc, None
    if kind is EdgeKind.GRADE_SELECT:
        k = e.payload["grade"]
        if k in src[0]:
            return GradeSet.of([k]), None
        return STRUCTURAL_ZERO, f"selects grade {k} from a value with grades {src[0]}"
    if kind is EdgeKind.NORM:
        return GradeSet.of([0]), None
    raise AssertionError(f"{kind} does not infer grades")


def _meet(tgt: PhgNode, found: list[tuple[int, GradeSet]], diagnostics: Optional[list]) -> GradeSet:
    """Combine every definition of a node in edge-id order, so the result is order independent.

    Disjoint definitions keep the lowest edge's grades and, when ``diagnostics``
    is given, report a conflict.
    """
    found = sorted(found, key=lambda t: t[0])
    first_id, acc = found[0]
    for eid, g in found[1:]:
        if acc.zero != g.zero or not (acc.zero or acc.bits & g.bits):
            if diagnostics is not None:
                diagnostics.append(
                    GradeDiagnostic(
                        tgt.id, acc, g, Severity.ERROR,
                        f"edge {eid} infers {g}, disjoint from edge {first_id} ({acc}); keeping edge {first_id}",
                        "ConflictingDefinitions",
                    )
                )
        elif not acc.zero:
            acc = acc & g
    return acc


def saturate(phg: Phg, order: str = "fifo") -> SaturationReport:
    """Run the worklist fixpoint; write final annotations back into the nodes.

    A hyperedge fires only once every one of its sources is Saturated.  A node
    becomes Saturated after all of its incoming inference edges have fired.
    Inputs (no incoming inference edges) start Saturated when fully declared.
    """
    if order not in ("fifo", "lifo"):
        raise ValueError(f"unknown worklist order {order!r}")
    nodes, edges = phg.nodes, phg.edges
    d = phg.algebra.d if phg.algebra is not None else None
    pending_src = {e.id: len(set(e.sources)) for e in edges if e.infers}
    pending_in = [0] * len(nodes)
    for e in edges:
        if e.infers:
            pending_in[e.target] += 1
    round_of: dict[int, int] = {}
    diagnostics: list[GradeDiagnostic] = []
    work: deque[int] = deque()
    saturated = known = fired = 0
    defs: dict[int, list[tuple[int, GradeSet]]] = {}

    for n in nodes:
        n.activation, n.grades = Activation.FRESH, UNKNOWN
        if pending_in[n.id]:
            continue
        declared = n.declared_grades
        if not declared.unknown:
            n.grades, n.activation = declared, Activation.SATURATED
            round_of[n.id] = 0
            saturated += 1
            known += 1
            work.append(n.id)
    initial = Quality(saturated, known, 0)
    trace: list[TraceStep] = []
    iterations = 0
    pop = work.popleft if order == "fifo" else work.pop

    while work:
        nid = pop()
        iterations += 1
        for e in phg.outgoing(nid):
            pending_src[e.id] -= 1
            if pending_src[e.id]:
                continue
            iterations += 1
            fired += 1
            tgt = nodes[e.target]
            inferred, warning = _edge_grades(phg, e, [nodes[s].grades for s in e.sources])
            if warning:
                diagnostics.append(GradeDiagnostic(tgt.id, tgt.declared_grades, inferred, Severity.WARNING, warning, "StructuralZero" if inferred.zero else "GradeWarning"))
            if tgt.grades.unknown:
                known += 1
            defs.setdefault(tgt.id, []).append((e.id, inferred))
            tgt.grades = _meet(tgt, defs[tgt.id], None)
            tgt.activation = max(tgt.activation, Activation.ELABORATED)
            rnd = 1 + max(round_of[s] for s in e.sources)
            round_of[e.target] = max(round_of.get(e.target, 0), rnd)
            pending_in[e.target] -= 1
            done = pending_in[e.target] == 0
            if done:
                tgt.activation = Activation.SATURATED
                saturated += 1
                tgt.grades = _meet(tgt, defs[tgt.id], diagnostics)
                diag = check_grades(tgt.declared_grades, tgt.grades, tgt.id, d)
                if diag is not None and not (diag.code == "StructuralZero" and warning):
                    diagnostics.append(diag)
                work.append(tgt.id)
            trace.append(TraceStep(e.id, e.target, inferred, done, round_of[e.target], Quality(saturated, known, fired)))

    stalled = {}
    for n in nodes:
        if n.activation is Activation.SATURATED:
            continue
        ins = phg.incoming(n.id)
        if not ins:
            stalled[n.id] = "input has no grade declaration"
        else:
            waiting = sorted({nodes[s].name for e in ins for s in e.sources if nodes[s].activation is not Activation.SATURATED})
            stalled[n.id] = "waiting on unsaturated sources: " + ", ".join(waiting)

    return SaturationReport(
        iterations=iterations,
        rounds=max((s.round for s in trace), default=0),
        grades={n.id: n.grades for n in nodes},
        activation={n.id: n.activation for n in nodes},
        trace=trace,
        stalled=stalled,
        diagnostics=diagnostics,
        initial=initial,
    )


def information_quality(report: SaturationReport, k: int) -> Quality:
    """Quality tuple after fixpoint step ``k`` (step 0 is the initial state).

    A componentwise proxy for information content: (saturated nodes, nodes with
    known grades, edges fired), compared lexicographically.
    """
    return report.qualities()[k]
