"""Grade inference over product kinds, at the signature level and from Cayley tables."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterable, Iterator, Optional

from .algebra import Algebra, ProductKind, popcount
from .errors import GradeOutOfRange


@dataclass(frozen=True)
class GradeSet:
    """Bit-set of grades.

    The empty set means *unknown* (nothing inferred yet).  ``STRUCTURAL_ZERO``
    is a separate value for results that grade arithmetic proves vanish.
    """

    bits: int = 0
    zero: bool = False

    @classmethod
    def of(cls, grades: Iterable[int]) -> "GradeSet":
        bits = 0
        for g in grades:
            if g < 0:
                raise GradeOutOfRange(f"negative grade {g}")
            bits |= 1 << g
        return cls(bits)

    @classmethod
    def full(cls, d: int) -> "GradeSet":
        return cls((1 << (d + 1)) - 1)

    @property
    def unknown(self) -> bool:
        return not self.bits and not self.zero

    def __iter__(self) -> Iterator[int]:
        b, g = self.bits, 0
        while b:
            if b & 1:
                yield g
            b >>= 1
            g += 1

    def __contains__(self, g: int) -> bool:
        return g >= 0 and bool(self.bits >> g & 1)

    def __len__(self) -> int:
        return popcount(self.bits)

    def __or__(self, other: "GradeSet") -> "GradeSet":
        if self.zero and other.zero:
            return STRUCTURAL_ZERO
        return GradeSet(self.bits | other.bits)

    def __and__(self, other: "GradeSet") -> "GradeSet":
        return GradeSet(self.bits & other.bits)

    def issubset(self, other: "GradeSet") -> bool:
        return not self.bits & ~other.bits

    def max(self) -> int:
        return self.bits.bit_length() - 1

    def __str__(self) -> str:
        if self.zero:
            return "zero"
        if self.unknown:
            return "?"
        return "{" + ",".join(map(str, self)) + "}"


STRUCTURAL_ZERO = GradeSet(0, True)
UNKNOWN = GradeSet(0)


def _check_range(d: int, *grades: int):
    for g in grades:
        if not 0 <= g <= d:
            raise GradeOutOfRange(f"grade {g} outside [0, {d}]")


def signature_grades(kind: ProductKind, p: int, q: int, d: int) -> GradeSet:
    """Output grades of a grade-p by grade-q product from grade arithmetic alone.

    For GP the top of the ladder is min(p+q, 2d-p-q): the operands must share
    at least p+q-d generators, each of which removes two from the grade.
    """
    _check_range(d, p, q)
    kind = ProductKind(kind)
    if kind is ProductKind.GP:
        lo, hi = abs(p - q), min(p + q, 2 * d - p - q)
        return GradeSet.of(range(lo, hi + 1, 2))
    if kind is ProductKind.OUTER:
        return STRUCTURAL_ZERO if p + q > d else GradeSet.of([p + q])
    if kind is ProductKind.INNER:
        return GradeSet.of([abs(p - q)])
    return STRUCTURAL_ZERO if p + q < d else GradeSet.of([p + q - d])


@lru_cache(maxsize=None)
def _table_grade_bits(alg: Algebra, kind: ProductKind, p: int, q: int) -> int:
    signs, masks = alg.table(kind)
    bits = 0
    for a in alg.blades_of_grade(p):
        srow, mrow = signs[a], masks[a]
        for b in alg.blades_of_grade(q):
            if srow[b]:
                bits |= 1 << popcount(mrow[b])
    return bits


def table_grades(alg: Algebra, kind: ProductKind, P: GradeSet, Q: GradeSet) -> GradeSet:
    """Exact output grades found by scanning the Cayley table over P x Q."""
    if P.zero or Q.zero:
        return STRUCTURAL_ZERO
    kind = ProductKind(kind)
    bits = 0
    for p in P:
        for q in Q:
            _check_range(alg.d, p, q)
            bits |= _table_grade_bits(alg, kind, p, q)
    return GradeSet(bits) if bits else STRUCTURAL_ZERO


def join_grades(grades: list[int], d: int) -> GradeSet:
    _check_range(d, *grades)
    total = sum(grades)
    return STRUCTURAL_ZERO if total > d else GradeSet.of([total])


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"
    NOTE = "note"


@dataclass(frozen=True)
class GradeDiagnostic:
    node: object
    declared: GradeSet
    inferred: GradeSet
    severity: Severity
    message: str
    code: str = "GradeConflict"


def slot_count(grades: GradeSet, d: int) -> int:
    return sum(comb(d, k) for k in grades if k <= d)


def check_grades(declared: GradeSet, inferred: GradeSet, node=None, d: Optional[int] = None) -> Optional[GradeDiagnostic]:
    """Compare a declared grade set against the inferred one; bit operations only."""
    if inferred.unknown or declared.unknown:
        return None
    if inferred.zero:
        return GradeDiagnostic(
            node, declared, inferred, Severity.WARNING,
            "provably zero computation: grade arithmetic forces this value to vanish",
            "StructuralZero",
        )
    if not declared.bits & inferred.bits:
        return GradeDiagnostic(
            node, declared, inferred, Severity.ERROR,
            f"declared grades {declared} cannot occur; inference gives {inferred}",
            "GradeConflict",
        )
    if declared.issubset(inferred):
        return None
    if d is not None:
        hint = (
            f"; narrowing the declaration cuts coefficient slots from "
            f"{slot_count(declared, d)} to {slot_count(inferred, d)}"
        )
    else:
        hint = ""
    return GradeDiagnostic(
        node, declared, inferred, Severity.WARNING,
        f"declared grades {declared} are wider than inferred {inferred}{hint}",
        "GradeOverGeneral",
    )
