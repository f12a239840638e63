import random

import pytest

from gen import small_signatures
from phgraph.algebra import ProductKind, Signature, build_algebra
from phgraph.errors import GradeOutOfRange
from phgraph.grade import (
    STRUCTURAL_ZERO,
    UNKNOWN,
    GradeSet,
    Severity,
    check_grades,
    join_grades,
    signature_grades,
    slot_count,
    table_grades,
)


def brute_grades(alg, kind, p, q):
    signs, masks = alg.table(kind)
    out = set()
    for a in alg.blades_of_grade(p):
        for b in alg.blades_of_grade(q):
            if signs[a][b]:
                out.add(bin(masks[a][b]).count("1"))
    return out


def test_gradeset_basics():
    g = GradeSet.of([1, 3])
    assert list(g) == [1, 3]
    assert 3 in g and 2 not in g
    assert len(g) == 2
    assert str(g) == "{1,3}"
    assert str(UNKNOWN) == "?"
    assert str(STRUCTURAL_ZERO) == "zero"
    assert UNKNOWN.unknown and not STRUCTURAL_ZERO.unknown
    assert (g & GradeSet.of([3])) == GradeSet.of([3])
    assert GradeSet.full(3) == GradeSet.of(range(4))
    with pytest.raises(GradeOutOfRange):
        GradeSet.of([-1])


@pytest.mark.parametrize("sig", [Signature(2, 0, 0), Signature(3, 0, 0), Signature(2, 1, 0), Signature(4, 0, 0), Signature(3, 1, 0)], ids=str)
def test_signature_rule_equals_table_when_nondegenerate(sig):
    alg = build_algebra(sig)
    for kind in ProductKind:
        for p in range(alg.d + 1):
            for q in range(alg.d + 1):
                sig_rule = signature_grades(kind, p, q, alg.d)
                brute = brute_grades(alg, kind, p, q)
                assert set(sig_rule) == brute or (sig_rule.zero and not brute)


@pytest.mark.parametrize("sig", list(small_signatures(4)), ids=str)
def test_table_grades_within_signature_rule(sig):
    alg = build_algebra(sig)
    for kind in ProductKind:
        for p in range(alg.d + 1):
            for q in range(alg.d + 1):
                got = table_grades(alg, kind, GradeSet.of([p]), GradeSet.of([q]))
                rule = signature_grades(kind, p, q, alg.d)
                assert got.zero or got.issubset(rule)
                assert got.zero == (not brute_grades(alg, kind, p, q))


def test_examples():
    assert signature_grades(ProductKind.GP, 1, 1, 3) == GradeSet.of([0, 2])
    assert signature_grades(ProductKind.OUTER, 2, 2, 3) is STRUCTURAL_ZERO
    assert signature_grades(ProductKind.REGRESSIVE, 1, 3, 4) == GradeSet.of([0])
    assert signature_grades(ProductKind.GP, 3, 2, 3) == GradeSet.of([1])
    assert join_grades([1, 1, 1], 4) == GradeSet.of([3])
    assert join_grades([2, 3], 4) is STRUCTURAL_ZERO
    with pytest.raises(GradeOutOfRange):
        signature_grades(ProductKind.GP, 5, 1, 4)


def test_degenerate_table_is_narrower():
    alg = build_algebra(Signature(0, 0, 2))
    got = table_grades(alg, ProductKind.GP, GradeSet.of([1]), GradeSet.of([1]))
    assert got == GradeSet.of([2])


def test_check_grades_outcomes():
    d = 4
    assert check_grades(GradeSet.of([2]), GradeSet.of([2]), d=d) is None
    assert check_grades(UNKNOWN, GradeSet.of([2]), d=d) is None
    err = check_grades(GradeSet.of([3]), GradeSet.of([2]), "n", d)
    assert err.severity is Severity.ERROR and err.code == "GradeConflict"
    wide = check_grades(GradeSet.of([0, 2, 4]), GradeSet.of([2]), "n", d)
    assert wide.severity is Severity.WARNING and "8 to 6" in wide.message
    zero = check_grades(GradeSet.of([2]), STRUCTURAL_ZERO, "n", d)
    assert zero.code == "StructuralZero"


def test_inference_is_monotone_in_operand_sets():
    alg = build_algebra(Signature(3, 0, 1))
    rng = random.Random(1)
    for _ in range(200):
        kind = rng.choice(list(ProductKind))
        A = GradeSet.of(rng.sample(range(5), rng.randint(1, 3)))
        B = GradeSet.of(rng.sample(range(5), rng.randint(1, 3)))
        A2 = A | GradeSet.of([rng.randrange(5)])
        small, big = table_grades(alg, kind, A, B), table_grades(alg, kind, A2, B)
        assert small.zero or small.issubset(big)


def test_slot_count():
    assert slot_count(GradeSet.of([1, 3]), 4) == 8
