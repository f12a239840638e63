import itertools
import random
from fractions import Fraction

import pytest

from gen import pga3, rand_fraction, triangle_area, triangle_area_sq
from phgraph.algebra import Mode, ProductKind, ideal_norm_squared, outer_join, product
from phgraph.autodiff import evaluate
from phgraph.errors import DuplicateVertex, GradeMismatch, ModeError, TooManyVertices
from phgraph.mesh import (
    MeshIssue,
    Orientation,
    add_boundary,
    boundaries,
    build_simplex,
    check_boundary_consistency,
    import_triangles,
    incidence,
    incidence_approx,
    orientation,
    simplices,
    triangle_area as pga_area,
    vertex_values,
)
from phgraph.phg import Phg

ALG = pga3()


def pt(*xyz):
    return ALG.point([Fraction(c) for c in xyz])


def sign_of(perm):
    s = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                s = -s
    return s


def test_join_is_antisymmetric_under_permutation():
    rng = random.Random(0)
    pts = [pt(*(rand_fraction(rng) for _ in range(3))) for _ in range(3)]
    base = outer_join(ALG, pts)
    for perm in itertools.permutations(range(3)):
        assert outer_join(ALG, [pts[i] for i in perm]) == base.scale(sign_of(perm))


def test_collinear_points_give_zero_face():
    face = outer_join(ALG, [pt(0, 0, 0), pt(1, 1, 1), pt(2, 2, 2)])
    assert face.is_zero()


def test_area_matches_cross_product():
    rng = random.Random(1)
    for _ in range(50):
        ps = [tuple(rand_fraction(rng) for _ in range(3)) for _ in range(3)]
        face = outer_join(ALG, [pt(*p) for p in ps])
        assert ideal_norm_squared(ALG, face) == triangle_area_sq(*ps)
        assert float(pga_area(ALG, face)) == pytest.approx(triangle_area(*ps))


def test_incidence_and_orientation():
    plane = outer_join(ALG, [pt(0, 0, 0), pt(1, 0, 0), pt(0, 1, 0)])
    line = outer_join(ALG, [pt(0, 0, 0), pt(1, 0, 0)])
    assert incidence(ALG, pt(3, -2, 0), plane)
    assert not incidence(ALG, pt(0, 0, 1), plane)
    assert incidence(ALG, pt(5, 0, 0), line)
    assert not incidence(ALG, pt(5, 1, 0), line)
    above, below = orientation(ALG, pt(0, 0, 1), plane), orientation(ALG, pt(0, 0, -1), plane)
    assert {above, below} == {Orientation.POSITIVE, Orientation.NEGATIVE}
    assert orientation(ALG, pt(7, 7, 0), plane) is Orientation.ON
    with pytest.raises(GradeMismatch):
        orientation(ALG, pt(0, 0, 1), line)


def test_predicates_are_invariant_under_positive_scaling():
    plane = outer_join(ALG, [pt(0, 0, 0), pt(1, 0, 0), pt(0, 1, 0)])
    p = pt(1, 2, 3)
    for k in (Fraction(1, 3), 2, 17):
        assert orientation(ALG, p.scale(k), plane) is orientation(ALG, p, plane)
        assert orientation(ALG, p, plane.scale(k)) is orientation(ALG, p, plane)
        assert incidence(ALG, pt(4, 4, 0).scale(k), plane)


def test_exact_predicates_refuse_floats():
    plane = outer_join(ALG, [pt(0, 0, 0), pt(1, 0, 0), pt(0, 1, 0)])
    with pytest.raises(ModeError):
        incidence(ALG, ALG.point([0.0, 0.0, 1.0], Mode.FLOAT), plane)
    with pytest.raises(ModeError):
        orientation(ALG, ALG.point([0.0, 0.0, 1.0], Mode.FLOAT), plane)
    assert incidence_approx(ALG, ALG.point([0.0, 0.0, 1e-12], Mode.FLOAT), plane, 1e-9)
    assert not incidence_approx(ALG, ALG.point([0.0, 0.0, 1e-6], Mode.FLOAT), plane, 1e-9)


def test_regressive_meet_of_plane_and_point_is_scalar():
    plane = outer_join(ALG, [pt(0, 0, 0), pt(1, 0, 0), pt(0, 1, 0)])
    m = product(ALG, ProductKind.REGRESSIVE, pt(0, 0, 2), plane)
    assert m.grade_set() == {0}


def points(names):
    g = Phg(ALG)
    for n in names:
        g.add_node(n, grades=[1])
    return g


def test_build_simplex_validation():
    g = points("abcde")
    s = build_simplex(g, ALG, ["a", "b", "c"])
    assert s.order == 2 and g.nodes[s.node].name == "s_a_b_c"
    with pytest.raises(DuplicateVertex):
        build_simplex(g, ALG, ["a", "a"])
    with pytest.raises(TooManyVertices):
        build_simplex(g, ALG, ["a", "b", "c", "d", "e"])
    with pytest.raises(ValueError):
        build_simplex(g, ALG, ["a"])
    g.add_node("biv", grades=[2])
    with pytest.raises(GradeMismatch):
        build_simplex(g, ALG, ["a", "biv"])
    assert set(simplices(g)) == {s.node}


def two_triangles():
    g = points("abcd")
    f1 = build_simplex(g, ALG, ["a", "b", "c"], "f1")
    f2 = build_simplex(g, ALG, ["b", "c", "d"], "f2")
    e = build_simplex(g, ALG, ["b", "c"], "bc")
    return g, f1, f2, e


def test_missing_boundary_then_fixed():
    g, f1, f2, e = two_triangles()
    diags = check_boundary_consistency(g)
    assert [d.kind for d in diags] == [MeshIssue.MISSING_BOUNDARY]
    bc = add_boundary(g, "f1", "f2", "bc")
    assert boundaries(g) == [bc]
    assert check_boundary_consistency(g) == []


def test_boundary_must_be_the_shared_edge():
    g, f1, f2, e = two_triangles()
    build_simplex(g, ALG, ["a", "b"], "ab")
    with pytest.raises(ValueError):
        add_boundary(g, "f1", "f2", "ab")


def test_duplicate_simplex_is_a_t_junction():
    g, f1, f2, e = two_triangles()
    build_simplex(g, ALG, ["c", "b"], "cb")
    kinds = [d.kind for d in check_boundary_consistency(g)]
    assert MeshIssue.T_JUNCTION in kinds


def test_value_level_t_junction_and_degenerate():
    g = points("abcm")
    build_simplex(g, ALG, ["a", "b"], "ab")
    build_simplex(g, ALG, ["a", "m"], "am")
    build_simplex(g, ALG, ["a", "b", "m"], "abm")
    vals = {g.resolve("a"): pt(0, 0, 0), g.resolve("b"): pt(2, 0, 0), g.resolve("m"): pt(1, 0, 0), g.resolve("c"): pt(0, 1, 0)}
    out = evaluate(g, vals)
    kinds = [d.kind for d in check_boundary_consistency(g, values=out)]
    assert MeshIssue.DEGENERATE_SIMPLEX in kinds
    # ab and am are parallel but not equal; scaling m to b would make them coincide
    vals[g.resolve("m")] = pt(2, 0, 0)
    out = evaluate(g, vals)
    assert MeshIssue.T_JUNCTION in [d.kind for d in check_boundary_consistency(g, values=out)]


def test_non_manifold_edge():
    g = points("abcde")
    for name, vs in (("f1", "abc"), ("f2", "abd"), ("f3", "abe")):
        build_simplex(g, ALG, list(vs), name)
    build_simplex(g, ALG, ["a", "b"], "ab")
    kinds = [d.kind for d in check_boundary_consistency(g)]
    assert MeshIssue.NON_MANIFOLD_EDGE in kinds


def test_node_filter():
    g, f1, f2, e = two_triangles()
    assert check_boundary_consistency(g, nodes=[f1.node, e.node]) == []


MESH = """
# unit square split along the diagonal
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
f 0 1 2
f 0 2 3
"""


def test_import_triangles_builds_a_consistent_mesh():
    g = Phg(ALG)
    mesh = import_triangles(g, ALG, MESH)
    assert len(mesh.points) == 4 and len(mesh.faces) == 2 and len(mesh.edges) == 5
    assert len(mesh.boundaries) == 1
    assert check_boundary_consistency(g) == []
    vals = dict(zip(mesh.points, vertex_values(ALG, MESH)))
    out = evaluate(g, vals)
    total = sum(pga_area(ALG, out[f.node]) for f in mesh.faces)
    assert total == 1


def test_import_rejects_bad_records():
    with pytest.raises(ValueError):
        import_triangles(Phg(ALG), ALG, "v 0 0 0\nq 1\n")
    with pytest.raises(ValueError):
        import_triangles(Phg(ALG), ALG, "v 0 0 0\nf 0 1\n")


def test_vertex_values_modes():
    vs = vertex_values(ALG, MESH, Mode.FLOAT)
    assert vs[2]["e1"] == 1.0 and vs[2].mode is Mode.FLOAT
