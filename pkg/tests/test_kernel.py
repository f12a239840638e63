import random
from fractions import Fraction

import pytest

from gen import grade, oracle_entry, pga3, random_mv, small_signatures
from phgraph.algebra import Mode, ProductKind, Signature, build_algebra, outer_join, product
from phgraph.errors import GradeOutOfRange, MissingSlot, StructuralZeroKernel
from phgraph.grade import GradeSet
from phgraph.kernel import (
    KernelIR,
    Op,
    apply_kernel,
    bind,
    contributions,
    emit_join_kernel,
    emit_kernel,
    join_kernel_counts,
    run_kernel,
    sparsity_profile,
    tensor_sparsity,
)

KINDS = [ProductKind.GP, ProductKind.OUTER, ProductKind.INNER, ProductKind.REGRESSIVE]


def oracle_nonzero(alg, kind, p, q):
    """Count nonzero table entries for grades p x q straight from word reduction."""
    n = 0
    for a in alg.blades_of_grade(p):
        for b in alg.blades_of_grade(q):
            s, _ = oracle_entry(alg, kind, a, b)
            n += s != 0
    return n


@pytest.mark.parametrize("sig", [Signature(3, 0, 1), Signature(2, 0, 1), Signature(3, 0, 0), Signature(1, 1, 1)], ids=str)
def test_profile_counts_match_oracle(sig):
    alg = build_algebra(sig)
    for kind in ("gp", "outer", "inner"):
        for p in range(alg.d + 1):
            for q in range(alg.d + 1):
                prof = sparsity_profile(alg, ProductKind(kind), p, q)
                assert prof.nonzero == oracle_nonzero(alg, kind, p, q)
                assert prof.multiplies == prof.nonzero


def test_pga_bivector_times_vector_profile():
    prof = sparsity_profile(pga3(), ProductKind.GP, 2, 1)
    assert (prof.nonzero, prof.restricted_dense, prof.adds) == (21, 24, 13)
    assert prof.reduction == pytest.approx(0.125)
    assert (prof.dense_multiplies, prof.dense_adds) == (256, 240)
    d = prof.as_dict()
    assert d["reduction_pct"] == 12.5 and d["grades"] == [2, 1]


def test_profile_grade_range():
    with pytest.raises(GradeOutOfRange):
        sparsity_profile(pga3(), ProductKind.GP, 5, 1)


def test_tensor_sparsity_values():
    assert tensor_sparsity(pga3(), ProductKind.GP) == pytest.approx(0.953125)
    assert tensor_sparsity(build_algebra(Signature(2, 0, 1)), ProductKind.GP) == pytest.approx(0.90625)


@pytest.mark.parametrize("sig", [Signature(3, 0, 1), Signature(2, 1, 0), Signature(2, 0, 1)], ids=str)
@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.value)
def test_kernel_matches_reference_product(sig, kind):
    alg = build_algebra(sig)
    rng = random.Random(hash((str(sig), kind.value)) & 0xFFFF)
    for _ in range(10):
        P = GradeSet.of(rng.sample(range(alg.d + 1), rng.randint(1, 2)))
        Q = GradeSet.of(rng.sample(range(alg.d + 1), rng.randint(1, 2)))
        try:
            kir = emit_kernel(alg, kind, P, Q)
        except StructuralZeroKernel:
            x, y = random_mv(alg, rng, set(P)), random_mv(alg, rng, set(Q))
            assert product(alg, kind, x, y).is_zero()
            continue
        for _ in range(3):
            x, y = random_mv(alg, rng, set(P)), random_mv(alg, rng, set(Q))
            assert apply_kernel(kir, [x, y]) == product(alg, kind, x, y)


def test_kernel_counts_agree_with_profile():
    alg = pga3()
    for kind in (ProductKind.GP, ProductKind.OUTER, ProductKind.INNER):
        for p in range(5):
            for q in range(5):
                prof = sparsity_profile(alg, kind, p, q)
                if not prof.nonzero:
                    continue
                kir = emit_kernel(alg, kind, GradeSet.of([p]), GradeSet.of([q]))
                assert kir.multiplies == prof.multiplies
                assert kir.adds == prof.adds


def test_fused_kernel_uses_muladd_and_agrees():
    alg = pga3()
    plain = emit_kernel(alg, ProductKind.GP, GradeSet.of([2]), GradeSet.of([1]))
    fused = emit_kernel(alg, ProductKind.GP, GradeSet.of([2]), GradeSet.of([1]), fused=True)
    assert Op.MULADD not in {i.op for i in plain.instrs}
    assert fused.tally().get("muladd", 0) > 0
    assert len(fused.instrs) < len(plain.instrs)
    rng = random.Random(1)
    x, y = random_mv(alg, rng, {2}), random_mv(alg, rng, {1})
    assert apply_kernel(fused, [x, y]) == apply_kernel(plain, [x, y])


def test_narrower_grades_never_cost_more():
    alg = pga3()
    full = emit_kernel(alg, ProductKind.GP, GradeSet.of(range(5)), GradeSet.of(range(5)))
    rng = random.Random(2)
    for _ in range(20):
        P = GradeSet.of(rng.sample(range(5), rng.randint(1, 4)))
        Q = GradeSet.of(rng.sample(range(5), rng.randint(1, 4)))
        k = emit_kernel(alg, ProductKind.GP, P, Q)
        assert k.multiplies <= full.multiplies
        sub = GradeSet.of(list(P)[:1])
        assert emit_kernel(alg, ProductKind.GP, sub, Q).multiplies <= k.multiplies


def test_scalar_times_k_vector_is_one_multiply_per_blade():
    alg = pga3()
    for k in range(5):
        kir = emit_kernel(alg, ProductKind.GP, GradeSet.of([0]), GradeSet.of([k]))
        assert kir.multiplies == len(alg.blades_of_grade(k))
        assert kir.adds == 0


def test_euclidean_plane_vector_product():
    alg = build_algebra(Signature(2, 0, 0))
    kir = emit_kernel(alg, ProductKind.GP, GradeSet.of([1]), GradeSet.of([1]))
    out = run_kernel(kir, {"a_e1": 2, "a_e2": 3, "b_e1": 5, "b_e2": 7})
    assert out == {"c_1": 2 * 5 + 3 * 7, "c_e12": 2 * 7 - 3 * 5}
    assert (kir.multiplies, kir.adds) == (4, 2)


def test_structural_zero_and_unknown_grades_refuse():
    alg = pga3()
    with pytest.raises(StructuralZeroKernel):
        emit_kernel(alg, ProductKind.OUTER, GradeSet.of([3]), GradeSet.of([2]))
    with pytest.raises(StructuralZeroKernel):
        emit_kernel(alg, ProductKind.GP, GradeSet(), GradeSet.of([1]))


def test_missing_slot():
    kir = emit_kernel(pga3(), ProductKind.GP, GradeSet.of([1]), GradeSet.of([1]))
    with pytest.raises(MissingSlot):
        run_kernel(kir, {"a_e0": 1})


def test_text_round_trip():
    alg = pga3()
    for kir in (
        emit_kernel(alg, ProductKind.GP, GradeSet.of([2]), GradeSet.of([1]), fused=True),
        emit_kernel(alg, ProductKind.REGRESSIVE, GradeSet.of([3]), GradeSet.of([3])),
        emit_join_kernel(alg, 2),
    ):
        text = kir.to_text()
        back = KernelIR.from_text(text)
        assert back == kir
        assert back.to_text() == text
        assert kir.to_dict()["counts"] == kir.tally()


def test_kernel_text_is_deterministic():
    alg = pga3()
    a = emit_kernel(alg, ProductKind.GP, GradeSet.of([2]), GradeSet.of([1])).to_text()
    b = emit_kernel(alg, ProductKind.GP, GradeSet.of([2]), GradeSet.of([1])).to_text()
    assert a == b
    assert a.splitlines()[0].startswith("# ")


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_join_kernel_equals_outer_fold(d):
    rng = random.Random(d)
    sigs = [s for s in small_signatures(d) if s.p + s.q + s.r == d]
    for sig in rng.sample(sigs, min(3, len(sigs))):
        alg = build_algebra(sig)
        for k in range(1, d):
            kir = emit_join_kernel(alg, k)
            assert (kir.multiplies, kir.adds) == join_kernel_counts(d, k)
            vs = [random_mv(alg, rng, {1}) for _ in range(k + 1)]
            assert apply_kernel(kir, vs) == outer_join(alg, vs)


def test_join_kernel_pga_counts():
    kir = emit_join_kernel(pga3(), 2)
    assert (kir.multiplies, kir.adds) == (24, 14)
    assert all(grade(pga3().blade_mask(o.partition("_")[2])) == 3 for o in kir.outputs)


def test_join_kernel_limits():
    with pytest.raises(ValueError):
        emit_join_kernel(pga3(), 0)
    with pytest.raises(StructuralZeroKernel):
        emit_join_kernel(pga3(), 4)


def test_bind_uses_operand_prefixes():
    alg = pga3()
    kir = emit_join_kernel(alg, 1)
    x = alg.mv({"e1": 1}, Mode.EXACT)
    y = alg.mv({"e2": Fraction(1, 2)}, Mode.EXACT)
    vals = bind(kir, [x, y])
    assert vals["x0_e1"] == 1 and vals["x1_e2"] == Fraction(1, 2) and vals["x0_e0"] == 0


def test_contributions_group_by_output():
    alg = build_algebra(Signature(2, 0, 0))
    c = contributions(alg, ProductKind.GP, alg.blades_of_grade(1), alg.blades_of_grade(1))
    assert sorted(len(v) for v in c.values()) == [2, 2]
