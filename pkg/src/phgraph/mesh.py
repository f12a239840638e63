"""Simplices as join hyperedges, with boundary checks and exact incidence.

Vertices are grade-1 homogeneous points ``e0 + x e1 + y e2 + z e3``; a
k-simplex is the join of its k+1 vertices, so it has grade k+1.  A boundary
relation ties two faces to the one node that is their shared facet.  Mesh
checks compare node identities, not coefficients.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Optional, Sequence

from .algebra import Algebra, Mode, Multivector, ProductKind, ideal_norm, product
from .errors import DuplicateVertex, GradeMismatch, ModeError, TooManyVertices
from .grade import GradeSet
from .phg import EdgeKind, Phg

BOUNDARY = "boundary"


@dataclass(frozen=True)
class SimplexNode:
    node: int
    order: int
    vertices: tuple[int, ...]


@dataclass(frozen=True)
class BoundaryConstraint:
    faces: tuple[int, int]
    edge: int
    hyperedge: int


class MeshIssue(str, enum.Enum):
    MISSING_BOUNDARY = "MissingBoundary"
    T_JUNCTION = "TJunction"
    DEGENERATE_SIMPLEX = "DegenerateSimplex"
    NON_MANIFOLD_EDGE = "NonManifoldEdge"


@dataclass(frozen=True)
class MeshDiagnostic:
    kind: MeshIssue
    nodes: tuple[int, ...]
    message: str


class Orientation(str, enum.Enum):
    ON = "on"
    POSITIVE = "positive"
    NEGATIVE = "negative"


def _vertex_grades(phg: Phg, v: int) -> GradeSet:
    n = phg.nodes[v]
    return n.declared_grades if not n.declared_grades.unknown else n.grades


def build_simplex(phg: Phg, alg: Algebra, vertices: Sequence, name: Optional[str] = None) -> SimplexNode:
    """Add a join hyperedge over ``vertices`` and its grade-(k+1) target node."""
    ids = [phg.resolve(v) for v in vertices]
    if len(set(ids)) != len(ids):
        dup = next(phg.nodes[i].name for i in ids if ids.count(i) > 1)
        raise DuplicateVertex(f"vertex {dup!r} repeated")
    if len(ids) > alg.d:
        raise TooManyVertices(f"{len(ids)} vertices exceed d={alg.d}; the join would vanish")
    if len(ids) < 2:
        raise ValueError("a simplex needs at least 2 vertices")
    one = GradeSet.of([1])
    for i in ids:
        if _vertex_grades(phg, i) != one:
            raise GradeMismatch(f"vertex {phg.nodes[i].name!r} has grades {_vertex_grades(phg, i)}, expected {one}")
    if name is None:
        name = "s_" + "_".join(phg.nodes[i].name for i in ids)
    nid = phg.add_node(name)
    phg.add_hyperedge(EdgeKind.JOIN, ids, nid)
    phg.nodes[nid].grades = GradeSet.of([len(ids)])
    return SimplexNode(nid, len(ids) - 1, tuple(ids))


def simplices(phg: Phg) -> dict[int, SimplexNode]:
    """Every node produced by a join of distinct grade-1 nodes."""
    one = GradeSet.of([1])
    out = {}
    for e in phg.edges:
        if e.kind is not EdgeKind.JOIN or len(set(e.sources)) != len(e.sources):
            continue
        if all(_vertex_grades(phg, s) == one for s in e.sources):
            out[e.target] = SimplexNode(e.target, len(e.sources) - 1, e.sources)
    return out


def add_boundary(phg: Phg, f1, f2, edge) -> BoundaryConstraint:
    """Record that ``edge`` is the single shared facet of faces ``f1`` and ``f2``."""
    f1, f2, edge = phg.resolve(f1), phg.resolve(f2), phg.resolve(edge)
    sx = simplices(phg)
    for n in (f1, f2, edge):
        if n not in sx:
            raise ValueError(f"{phg.nodes[n].name!r} is not a simplex node")
    shared = set(sx[f1].vertices) & set(sx[f2].vertices)
    if set(sx[edge].vertices) != shared:
        raise ValueError(
            f"{phg.nodes[edge].name!r} spans different vertices than the intersection of "
            f"{phg.nodes[f1].name!r} and {phg.nodes[f2].name!r}"
        )
    eid = phg.add_hyperedge(EdgeKind.CUSTOM, [f1, f2], edge, {"relation": BOUNDARY})
    return BoundaryConstraint((f1, f2), edge, eid)


def boundaries(phg: Phg) -> list[BoundaryConstraint]:
    return [
        BoundaryConstraint((e.sources[0], e.sources[1]), e.target, e.id)
        for e in phg.edges
        if e.kind is EdgeKind.CUSTOM and e.payload.get("relation") == BOUNDARY and len(e.sources) == 2
    ]


def _same_up_to_sign(x: Multivector, y: Multivector) -> bool:
    return x == y or x == -y


def check_boundary_consistency(
    phg: Phg,
    nodes: Optional[Sequence[int]] = None,
    values: Optional[Mapping[int, Multivector]] = None,
) -> list[MeshDiagnostic]:
    """Structural mesh checks; ``values`` (node -> multivector) enables DegenerateSimplex and value-level TJunctions."""
    sx = simplices(phg)
    if nodes is not None:
        keep = {phg.resolve(n) for n in nodes}
        sx = {k: v for k, v in sx.items() if k in keep}
    names = lambda ids: ", ".join(phg.nodes[i].name for i in ids)  # noqa: E731
    out: list[MeshDiagnostic] = []

    by_verts: dict[frozenset, list[int]] = {}
    for s in sx.values():
        by_verts.setdefault(frozenset(s.vertices), []).append(s.node)

    for verts, ids in by_verts.items():
        if len(ids) > 1:
            out.append(MeshDiagnostic(MeshIssue.T_JUNCTION, tuple(ids), f"distinct nodes {names(ids)} span the same vertices"))
    if values is not None:
        seen = sorted(sx.values(), key=lambda s: s.node)
        for a, b in combinations(seen, 2):
            if a.order != b.order or set(a.vertices) == set(b.vertices):
                continue
            va, vb = values.get(a.node), values.get(b.node)
            if va is not None and vb is not None and not va.is_zero() and _same_up_to_sign(va, vb):
                out.append(MeshDiagnostic(MeshIssue.T_JUNCTION, (a.node, b.node), f"{names([a.node, b.node])} coincide numerically but are built from different vertices"))

    relations: dict[frozenset, list[int]] = {}
    for bc in boundaries(phg):
        relations.setdefault(frozenset(bc.faces), []).append(bc.edge)

    faces_of: dict[frozenset, list[int]] = {}
    tops = sorted((s for s in sx.values() if s.order >= 2), key=lambda s: s.node)
    for f1, f2 in combinations(tops, 2):
        if f1.order != f2.order:
            continue
        shared = frozenset(f1.vertices) & frozenset(f2.vertices)
        if len(shared) < f1.order:
            continue
        if len(shared) == f1.order + 1:
            continue  # same vertex set: reported as a duplicate above
        for f in (f1.node, f2.node):
            lst = faces_of.setdefault(shared, [])
            if f not in lst:
                lst.append(f)
        edges = relations.get(frozenset((f1.node, f2.node)), [])
        if any(sx.get(e) and frozenset(sx[e].vertices) == shared for e in edges):
            continue
        if shared in by_verts:
            msg = f"faces {names([f1.node, f2.node])} share edge {names(by_verts[shared])} without a boundary relation"
        else:
            msg = f"faces {names([f1.node, f2.node])} share vertices {names(sorted(shared))} but no edge node exists"
        out.append(MeshDiagnostic(MeshIssue.MISSING_BOUNDARY, (f1.node, f2.node), msg))

    for shared, faces in faces_of.items():
        if len(faces) > 2:
            ids = tuple(faces) + tuple(by_verts.get(shared, ()))
            out.append(MeshDiagnostic(MeshIssue.NON_MANIFOLD_EDGE, ids, f"{len(faces)} faces ({names(faces)}) meet along vertices {names(sorted(shared))}"))

    if values is not None:
        for s in sorted(sx.values(), key=lambda s: s.node):
            v = values.get(s.node)
            if v is not None and v.is_zero():
                out.append(MeshDiagnostic(MeshIssue.DEGENERATE_SIMPLEX, (s.node,) + s.vertices, f"{phg.nodes[s.node].name} is exactly zero: its vertices are dependent"))
    return out


def _require_exact(*xs: Multivector) -> None:
    for x in xs:
        if x.mode is not Mode.EXACT:
            raise ModeError("exact predicates need exact-mode operands; use the tolerance variant for floats")


def _pure_grade(x: Multivector) -> int:
    gs = x.grade_set()
    if len(gs) != 1:
        raise GradeMismatch(f"incidence needs a single-grade operand, got grades {sorted(gs)}")
    return next(iter(gs))


def _incidence_product(alg: Algebra, x: Multivector, y: Multivector) -> Multivector:
    p, q = _pure_grade(x), _pure_grade(y)
    kind = ProductKind.REGRESSIVE if p + q >= alg.d else ProductKind.OUTER
    return product(alg, kind, x, y)


def incidence(alg: Algebra, x: Multivector, y: Multivector) -> bool:
    """Exact incidence: the meet (or, below complementary grades, the join) vanishes identically."""
    _require_exact(x, y)
    if x.is_zero() or y.is_zero():
        return True
    return _incidence_product(alg, x, y).is_zero()


def incidence_approx(alg: Algebra, x: Multivector, y: Multivector, tol: float) -> bool:
    """Float variant with an explicit absolute tolerance on the residual coefficients."""
    if x.is_zero() or y.is_zero():
        return True
    r = _incidence_product(alg, x.as_mode(Mode.FLOAT), y.as_mode(Mode.FLOAT))
    return all(abs(v) <= tol for v in r.coeffs.values())


def orientation(alg: Algebra, point: Multivector, plane: Multivector) -> Orientation:
    """Side of ``plane`` that ``point`` lies on, from the sign of their meet."""
    _require_exact(point, plane)
    p, q = _pure_grade(point), _pure_grade(plane)
    if p + q != alg.d:
        raise GradeMismatch(f"orientation needs complementary grades, got {p} and {q}")
    s = product(alg, ProductKind.REGRESSIVE, point, plane)[0]
    if s == 0:
        return Orientation.ON
    return Orientation.POSITIVE if s > 0 else Orientation.NEGATIVE


def triangle_area(alg: Algebra, face: Multivector):
    """Half the norm of the ideal (e0-bearing) part of a three-point join."""
    return ideal_norm(alg, face) / 2


@dataclass
class TriangleMesh:
    phg: Phg
    points: list[int]
    edges: dict[frozenset, int]
    faces: list[SimplexNode]
    boundaries: list[BoundaryConstraint]


def import_triangles(phg: Phg, alg: Algebra, text: str) -> TriangleMesh:
    """Indexed triangle list: ``v x y z`` lines then ``f i j k`` lines (0-based).

    Every vertex becomes a grade-1 node, every distinct edge one join node, every
    face a join node, and each pair of faces sharing an edge a boundary relation.
    """
    coords: list[tuple[str, ...]] = []
    tris: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            coords.append(tuple(rest))
        elif tag == "f":
            if len(rest) != 3:
                raise ValueError(f"line {lineno}: a face needs 3 vertex indices")
            tris.append(tuple(int(i) for i in rest))
        else:
            raise ValueError(f"line {lineno}: unknown record {tag!r}")
    pts = [phg.add_node(f"v{i}", grades=[1]) for i in range(len(coords))]
    edges: dict[frozenset, int] = {}
    faces = []
    for t, (i, j, k) in enumerate(tris):
        for a, b in ((i, j), (j, k), (i, k)):
            key = frozenset((pts[a], pts[b]))
            if key not in edges:
                lo, hi = sorted((a, b))
                edges[key] = build_simplex(phg, alg, [pts[lo], pts[hi]], f"edge_{lo}_{hi}").node
        faces.append(build_simplex(phg, alg, [pts[i], pts[j], pts[k]], f"face_{t}"))
    rels = []
    for f1, f2 in combinations(faces, 2):
        shared = frozenset(f1.vertices) & frozenset(f2.vertices)
        if len(shared) == 2:
            rels.append(add_boundary(phg, f1.node, f2.node, edges[shared]))
    return TriangleMesh(phg, pts, edges, faces, rels)


def vertex_values(alg: Algebra, text: str, mode: Mode = Mode.EXACT) -> list[Multivector]:
    """Point multivectors for the ``v`` records of an indexed triangle list."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line.startswith("v "):
            vals = [Fraction(c) if mode is Mode.EXACT else float(c) for c in line.split()[1:]]
            out.append(alg.point(vals, mode))
    return out
