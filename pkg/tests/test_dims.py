import random
from fractions import Fraction

import pytest

from gen import inject_contradiction, pga3, random_dim_system
from phgraph.algebra import Signature, build_algebra
from phgraph.dims import (
    Consistent,
    DimConstraint,
    Inconsistent,
    collect_constraints,
    describe,
    format_unit,
    mixed_dimension_warnings,
    parse_unit,
    satisfies,
    solve,
    unit_div,
    unit_mul,
)
from phgraph.phg import Phg, saturate

BASE = ("m", "kg", "s")


def test_parse_and_format_units():
    assert parse_unit("kg*m/s^2", BASE) == (1, 1, -2)
    assert parse_unit("m^2", BASE) == (2, 0, 0)
    assert parse_unit("1", BASE) == (0, 0, 0)
    assert parse_unit("m/s/s", BASE) == (1, 0, -2)
    assert format_unit((1, 1, -2), BASE) == "m*kg/s^2"
    assert format_unit((0, 0, 0), BASE) == "1"
    for expr in ("kg*m/s^2", "m^3/kg", "s"):
        assert parse_unit(format_unit(parse_unit(expr, BASE), BASE), BASE) == parse_unit(expr, BASE)
    with pytest.raises(ValueError):
        parse_unit("furlong", BASE)
    with pytest.raises(ValueError):
        parse_unit("m+s", BASE)


def test_unit_arithmetic():
    assert unit_mul((1, 0, 0), (0, 1, -1)) == (1, 1, -1)
    assert unit_div((1, 0, 0), (0, 0, 1)) == (1, 0, -1)


def triangle(area_unit=(2, 0, 0)):
    g = Phg(pga3(), units=BASE)
    for n in ("p1", "p2", "p3"):
        g.add_node(n, grades=[1], unit=(1, 0, 0))
    g.add_node("face")
    g.add_node("area", "scalar", unit=area_unit)
    g.add_hyperedge("join", ["p1", "p2", "p3"], "face")
    g.add_hyperedge("norm", ["face"], "area", {"ideal": True, "scale": Fraction(1, 2)})
    return g


def test_triangle_is_consistent():
    g = triangle()
    sol = solve(collect_constraints(g))
    assert isinstance(sol, Consistent)
    assert sol.assignment[g.resolve("face")] == (3, 0, 0)
    assert sol.assignment[("scale", 1)] == (-1, 0, 0)
    text = describe(g, sol)
    assert text.startswith("consistent;") and "area: m^2" in text and "scale[area]: 1/m" in text


def test_norm_scale_absorbs_any_declared_unit():
    g = triangle(area_unit=(0, 1, 0))
    assert isinstance(solve(collect_constraints(g)), Consistent)


def test_force_times_distance_is_not_velocity():
    g = Phg(build_algebra(Signature(3, 0, 0)), units=BASE)
    g.add_node("f", grades=[1], unit=parse_unit("kg*m/s^2", BASE))
    g.add_node("d", grades=[1], unit=parse_unit("m", BASE))
    g.add_node("work", unit=parse_unit("m/s", BASE))
    g.add_hyperedge("gp", ["f", "d"], "work")
    sol = solve(collect_constraints(g))
    assert isinstance(sol, Inconsistent)
    assert sol.constraint.provenance == ("edge", 0)
    assert "inconsistent at constraint" in describe(g, sol)


def test_undeclared_inputs_are_dimensionless():
    g = Phg(pga3(), units=BASE)
    g.add_node("a", grades=[1])
    g.add_node("b", grades=[1], unit=(0, 0, 1))
    g.add_node("c")
    g.add_hyperedge("gp", ["a", "b"], "c")
    sol = solve(collect_constraints(g))
    assert sol.assignment[g.resolve("c")] == (0, 0, 1)


def test_sandwich_rotor_must_be_dimensionless():
    g = Phg(pga3(), units=BASE)
    g.add_node("R", grades=[0, 2], unit=(1, 0, 0))
    g.add_node("x", grades=[1], unit=(1, 0, 0))
    g.add_node("y")
    g.add_hyperedge("sandwich", ["R", "x"], "y")
    assert isinstance(solve(collect_constraints(g)), Inconsistent)


def test_no_units_means_no_constraints():
    g = Phg(pga3())
    g.add_node("a", grades=[1])
    assert collect_constraints(g) == []
    assert isinstance(solve([]), Consistent)


def test_fractional_exponent_is_rejected():
    cons = [DimConstraint(((0, 2),), (1,), "half")]
    sol = solve(cons)
    assert isinstance(sol, Inconsistent) and "fractional" in sol.reason


def test_underdetermined_variables_are_reported():
    cons = [DimConstraint(((0, 1), (1, -1)), (0,), "tie")]
    sol = solve(cons)
    assert isinstance(sol, Consistent)
    assert sol.free == [1]
    assert sol.underdetermined == [0, 1]
    assert satisfies(cons, sol.assignment)


@pytest.mark.parametrize("seed", range(20))
def test_random_systems_recover_truth(seed):
    rng = random.Random(seed)
    cons, truth = random_dim_system(rng, rng.randint(3, 60))
    sol = solve(cons)
    assert isinstance(sol, Consistent)
    assert sol.assignment == {v: truth[v] for v in sol.assignment}
    assert satisfies(cons, sol.assignment)


@pytest.mark.parametrize("seed", range(20))
def test_injected_contradiction_is_located(seed):
    rng = random.Random(100 + seed)
    cons, truth = random_dim_system(rng, rng.randint(3, 60))
    cons, idx = inject_contradiction(rng, cons, truth)
    sol = solve(cons)
    assert isinstance(sol, Inconsistent)
    assert sol.index == idx
    assert sol.constraint.label == "injected"
    # every prefix before the culprit is still satisfiable
    assert isinstance(solve(cons[:idx]), Consistent)


def test_mixed_dimension_warning():
    g = Phg(pga3(), units=BASE)
    g.add_node("a", grades=[0, 1], unit=(1, 0, 0))
    g.add_node("b", grades=[1], unit=(0, 0, 1))
    g.add_node("c")
    g.add_hyperedge("gp", ["a", "b"], "c")
    saturate(g)
    sol = solve(collect_constraints(g))
    warns = mixed_dimension_warnings(g, sol)
    assert [eid for eid, _ in warns] == [0]
