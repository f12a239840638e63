"""Clifford algebras Cl(p,q,r), generated Cayley tables, and dense products.

Blades are bit-masks over the generators.  Generators are ordered degenerate
first, then positive, then negative, so in Cl(3,0,1) bit 0 is ``e0`` (squares
to zero) and bits 1..3 are ``e1..e3``.  Every other module checks itself
against the dense products defined here.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .errors import AlgebraMismatch, DimensionCeilingExceeded, GradeOutOfRange, ModeMismatch

MAX_DIMENSION = 8
FLOAT_DROP_RATIO = 1e-14

Scalar = Union[float, Fraction]


class Mode(str, enum.Enum):
    FLOAT = "float"
    EXACT = "exact"


class ProductKind(str, enum.Enum):
    GP = "gp"
    OUTER = "outer"
    INNER = "inner"
    REGRESSIVE = "regressive"


class GradePreservationWarning(UserWarning):
    """A sandwich product changed the grade set of its argument."""


class CayleyEntry(NamedTuple):
    sign: int
    result: int


@dataclass(frozen=True)
class Signature:
    p: int
    q: int = 0
    r: int = 0

    def __post_init__(self):
        if min(self.p, self.q, self.r) < 0:
            raise ValueError(f"negative signature component in {self}")

    @property
    def d(self) -> int:
        return self.p + self.q + self.r

    def __str__(self) -> str:
        return f"Cl({self.p},{self.q},{self.r})"


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def reorder_sign(a: int, b: int) -> int:
    """Sign from sorting the generator sequence of ``a`` followed by ``b``."""
    a >>= 1
    swaps = 0
    while a:
        swaps += popcount(a & b)
        a >>= 1
    return -1 if swaps & 1 else 1


def exact_sqrt(value: Scalar) -> Scalar:
    """Square root, exact when ``value`` is a rational perfect square."""
    if isinstance(value, Fraction) and value >= 0:
        n, d = value.numerator, value.denominator
        rn, rd = math.isqrt(n), math.isqrt(d)
        if rn * rn == n and rd * rd == d:
            return Fraction(rn, rd)
    return math.sqrt(value)


class Algebra:
    """Immutable Clifford algebra with lazily generated per-kind product tables."""

    def __init__(self, signature: Signature):
        self.signature = signature
        self.d = d = signature.d
        r, p = signature.r, signature.p
        self.metric = tuple([0] * r + [1] * p + [-1] * signature.q)
        self.size = 1 << d
        self.pseudoscalar = self.size - 1
        self.blades = tuple(range(self.size))
        self.degenerate_mask = (1 << r) - 1
        offset = 0 if r else 1
        self._gen_names = [str(i + offset) for i in range(d)]
        self.names = tuple(self._name(m) for m in self.blades)
        self._by_name = {n: m for m, n in enumerate(self.names)}
        self._by_grade = tuple(
            tuple(m for m in self.blades if popcount(m) == k) for k in range(d + 1)
        )
        self._tables: dict[ProductKind, tuple[tuple[tuple[int, ...], ...], tuple[tuple[int, ...], ...]]] = {}

    def __repr__(self) -> str:
        return f"Algebra({self.signature})"

    def _name(self, mask: int) -> str:
        if mask == 0:
            return "1"
        return "e" + "".join(self._gen_names[i] for i in range(self.d) if mask >> i & 1)

    def blade_name(self, mask: int) -> str:
        return self.names[mask]

    def blade_mask(self, name: str) -> int:
        """Mask of a canonical blade name (``"1"``, ``"e0"``, ``"e12"``...)."""
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"{name!r} is not a canonical blade of {self.signature}") from None

    def blades_of_grade(self, k: int) -> tuple[int, ...]:
        if not 0 <= k <= self.d:
            raise GradeOutOfRange(f"grade {k} outside [0, {self.d}]")
        return self._by_grade[k]

    def grade(self, mask: int) -> int:
        return popcount(mask)

    # -- Cayley tables -------------------------------------------------

    def entry(self, kind: ProductKind, a: int, b: int) -> CayleyEntry:
        signs, masks = self.table(kind)
        return CayleyEntry(signs[a][b], masks[a][b])

    def table(self, kind: ProductKind):
        """(signs, result masks), each a 2^d x 2^d nested tuple."""
        kind = ProductKind(kind)
        if kind not in self._tables:
            self._tables[kind] = self._build_table(kind)
        return self._tables[kind]

    def _build_table(self, kind: ProductKind):
        n = self.size
        signs, masks = [], []
        for a in range(n):
            srow, mrow = [], []
            ga = popcount(a)
            for b in range(n):
                if kind is ProductKind.REGRESSIVE:
                    e = self._regressive_entry(a, b)
                else:
                    e = blade_product(self, a, b)
                    if e.sign:
                        g = popcount(e.result)
                        if kind is ProductKind.OUTER and a & b:
                            e = CayleyEntry(0, e.result)
                        elif kind is ProductKind.INNER and g != abs(ga - popcount(b)):
                            e = CayleyEntry(0, e.result)
                srow.append(e.sign)
                mrow.append(e.result if e.sign else (a & b if kind is ProductKind.REGRESSIVE else a ^ b))
            signs.append(tuple(srow))
            masks.append(tuple(mrow))
        return tuple(signs), tuple(masks)

    def complement_sign(self, mask: int) -> int:
        """Sign s with blade ^ (s * complement_mask) = +pseudoscalar."""
        return reorder_sign(mask, self.pseudoscalar ^ mask)

    def uncomplement_sign(self, mask: int) -> int:
        """Sign s such that the right complement of s*(I^mask) is the blade ``mask``."""
        return reorder_sign(self.pseudoscalar ^ mask, mask)

    def _regressive_entry(self, a: int, b: int) -> CayleyEntry:
        full = self.pseudoscalar
        ca, cb = full ^ a, full ^ b
        if ca & cb:
            return CayleyEntry(0, a & b)
        sign = self.complement_sign(a) * self.complement_sign(b) * reorder_sign(ca, cb)
        joined = ca | cb
        sign *= self.uncomplement_sign(joined)
        return CayleyEntry(sign, full ^ joined)

    # -- construction helpers -----------------------------------------

    def mv(self, coeffs: Mapping[Union[int, str], Scalar] | None = None, mode: Mode = Mode.FLOAT) -> "Multivector":
        """Multivector from a ``{blade: coefficient}`` map; blades by mask or name."""
        data = {}
        for k, v in (coeffs or {}).items():
            data[self.blade_mask(k) if isinstance(k, str) else k] = v
        return Multivector(self, data, mode)

    def scalar(self, value: Scalar, mode: Mode = Mode.FLOAT) -> "Multivector":
        return Multivector(self, {0: value}, mode)

    def vector(self, values: Sequence[Scalar], mode: Mode = Mode.FLOAT) -> "Multivector":
        """Grade-1 multivector with one coefficient per generator, in generator order."""
        if len(values) != self.d:
            raise ValueError(f"expected {self.d} vector coefficients, got {len(values)}")
        return Multivector(self, {1 << i: v for i, v in enumerate(values)}, mode)

    def from_list(self, values: Sequence[Scalar], mode: Mode = Mode.FLOAT) -> "Multivector":
        if len(values) != self.size:
            raise ValueError(f"expected {self.size} coefficients, got {len(values)}")
        return Multivector(self, dict(enumerate(values)), mode)

    def point(self, coords: Sequence[Scalar], mode: Mode = Mode.EXACT) -> "Multivector":
        """Homogeneous grade-1 point e0 + x e1 + y e2 + ... (needs r >= 1)."""
        if self.signature.r < 1 or len(coords) != self.d - 1:
            raise ValueError(f"point embedding needs r >= 1 and {self.d - 1} coordinates")
        data = {1: 1}
        data.update({1 << (i + 1): c for i, c in enumerate(coords)})
        return Multivector(self, data, mode)


@lru_cache(maxsize=None)
def build_algebra(sig: Signature, ceiling: int = MAX_DIMENSION) -> Algebra:
    if sig.d > ceiling:
        raise DimensionCeilingExceeded(f"{sig} has d={sig.d} > ceiling {ceiling}")
    return Algebra(sig)


def blade_product(alg: Algebra, a: int, b: int) -> CayleyEntry:
    """Geometric product of two basis blades as (sign, result mask)."""
    sign = reorder_sign(a, b)
    common = a & b
    i = 0
    while common:
        if common & 1:
            m = alg.metric[i]
            if m == 0:
                return CayleyEntry(0, a ^ b)
            sign *= m
        common >>= 1
        i += 1
    return CayleyEntry(sign, a ^ b)


def _coerce(value, mode: Mode) -> Scalar:
    if mode is Mode.EXACT:
        return value if isinstance(value, Fraction) else Fraction(value)
    return float(value)


class Multivector:
    """Sparse blade -> coefficient map in one numeric mode.

    Zero coefficients are never stored.  In float mode, coefficients smaller
    than ``FLOAT_DROP_RATIO`` times the largest magnitude are dropped too.
    """

    __slots__ = ("algebra", "coeffs", "mode")

    def __init__(self, algebra: Algebra, coeffs: Mapping[int, Scalar] | None = None, mode: Mode = Mode.FLOAT):
        mode = Mode(mode)
        self.algebra = algebra
        self.mode = mode
        data = {}
        for m, v in (coeffs or {}).items():
            if not 0 <= m < algebra.size:
                raise ValueError(f"blade mask {m} invalid for {algebra.signature}")
            v = _coerce(v, mode)
            if v:
                data[m] = v
        if mode is Mode.FLOAT and data:
            cutoff = FLOAT_DROP_RATIO * max(abs(v) for v in data.values())
            data = {m: v for m, v in data.items() if abs(v) >= cutoff}
        self.coeffs = dict(sorted(data.items()))

    # -- basic structure ---------------------------------------------------

    @classmethod
    def _trusted(cls, algebra: Algebra, data: dict, mode: Mode) -> "Multivector":
        """Build from values already in ``mode`` with valid masks; skips coercion."""
        out = cls.__new__(cls)
        out.algebra, out.mode = algebra, mode
        data = {m: v for m, v in data.items() if v}
        if mode is Mode.FLOAT and data:
            cutoff = FLOAT_DROP_RATIO * max(abs(v) for v in data.values())
            data = {m: v for m, v in data.items() if abs(v) >= cutoff}
        out.coeffs = dict(sorted(data.items()))
        return out

    @classmethod
    def zero(cls, algebra: Algebra, mode: Mode = Mode.FLOAT) -> "Multivector":
        return cls(algebra, {}, mode)

    def grade_set(self) -> frozenset[int]:
        return frozenset(popcount(m) for m in self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, blade: Union[int, str]) -> Scalar:
        if isinstance(blade, str):
            blade = self.algebra.blade_mask(blade)
        return self.coeffs.get(blade, _coerce(0, self.mode))

    def to_list(self) -> list[Scalar]:
        z = _coerce(0, self.mode)
        return [self.coeffs.get(m, z) for m in self.algebra.blades]

    def as_mode(self, mode: Mode) -> "Multivector":
        mode = Mode(mode)
        if mode is self.mode:
            return self
        return Multivector(self.algebra, self.coeffs, mode)

    def map(self, fn) -> "Multivector":
        """Apply ``fn(mask, coeff)`` to every stored coefficient."""
        return Multivector(self.algebra, {m: fn(m, v) for m, v in self.coeffs.items()}, self.mode)

    def _check(self, other: "Multivector"):
        if other.algebra is not self.algebra:
            raise AlgebraMismatch(f"{self.algebra.signature} vs {other.algebra.signature}")
        if other.mode is not self.mode:
            raise ModeMismatch(f"{self.mode.value} vs {other.mode.value}")

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Multivector):
            other = self.algebra.scalar(other, self.mode)
        self._check(other)
        out = dict(self.coeffs)
        for m, v in other.coeffs.items():
            out[m] = out[m] + v if m in out else v
        return Multivector._trusted(self.algebra, out, self.mode)

    __radd__ = __add__

    def __neg__(self):
        return Multivector._trusted(self.algebra, {m: -v for m, v in self.coeffs.items()}, self.mode)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor: Scalar) -> "Multivector":
        factor = _coerce(factor, self.mode)
        return Multivector(self.algebra, {m: v * factor for m, v in self.coeffs.items()}, self.mode)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return product(self.algebra, ProductKind.GP, self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __xor__(self, other):
        return product(self.algebra, ProductKind.OUTER, self, other)

    def __or__(self, other):
        return product(self.algebra, ProductKind.INNER, self, other)

    def __and__(self, other):
        return product(self.algebra, ProductKind.REGRESSIVE, self, other)

    def __invert__(self):
        return reverse(self)

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return (
            self.algebra is other.algebra
            and self.mode is other.mode
            and self.coeffs == other.coeffs
        )

    __hash__ = None

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        names = self.algebra.names
        parts = []
        for m, v in self.coeffs.items():
            parts.append(str(v) if m == 0 else f"{v}*{names[m]}")
        return " + ".join(parts)


def _exact_product(alg: Algebra, signs, masks, x: Multivector, y: Multivector) -> Multivector:
    """Rational product with integer (numerator, denominator) accumulators; one reduction per blade."""
    acc: dict[int, list[int]] = {}
    right = [(b, cb.numerator, cb.denominator) for b, cb in y.coeffs.items()]
    for a, ca in x.coeffs.items():
        srow, mrow = signs[a], masks[a]
        na, da = ca.numerator, ca.denominator
        for b, nb, db in right:
            s = srow[b]
            if s:
                n, d = s * na * nb, da * db
                m = mrow[b]
                cur = acc.get(m)
                if cur is None:
                    acc[m] = [n, d]
                elif cur[1] == d:
                    cur[0] += n
                else:
                    cur[0] = cur[0] * d + n * cur[1]
                    cur[1] *= d
    out = {m: Fraction(n, d) for m, (n, d) in acc.items() if n}
    return Multivector._trusted(alg, out, Mode.EXACT)


def product(alg: Algebra, kind: ProductKind, x: Multivector, y: Multivector) -> Multivector:
    """Dense product of ``kind`` by scanning every stored blade pair."""
    if x.algebra is not alg:
        raise AlgebraMismatch(f"left operand lives in {x.algebra.signature}, not {alg.signature}")
    x._check(y)
    signs, masks = alg.table(kind)
    if x.mode is Mode.EXACT:
        return _exact_product(alg, signs, masks, x, y)
    out: dict[int, Scalar] = {}
    for a, ca in x.coeffs.items():
        srow, mrow = signs[a], masks[a]
        for b, cb in y.coeffs.items():
            s = srow[b]
            if s:
                m = mrow[b]
                v = ca * cb
                if m in out:
                    out[m] = out[m] + v if s > 0 else out[m] - v
                else:
                    out[m] = v if s > 0 else -v
    return Multivector._trusted(alg, out, x.mode)


def outer_join(alg: Algebra, factors: Sequence[Multivector]) -> Multivector:
    """Left fold of the outer product over two or more factors."""
    if len(factors) < 2:
        raise ValueError("outer_join needs at least two factors")
    acc = factors[0]
    for f in factors[1:]:
        acc = product(alg, ProductKind.OUTER, acc, f)
    return acc


def reverse(x: Multivector) -> Multivector:
    return x.map(lambda m, v: -v if (popcount(m) * (popcount(m) - 1) // 2) & 1 else v)


def grade_involution(x: Multivector) -> Multivector:
    return x.map(lambda m, v: -v if popcount(m) & 1 else v)


def grade_project(x: Multivector, k: int) -> Multivector:
    if not 0 <= k <= x.algebra.d:
        raise GradeOutOfRange(f"grade {k} outside [0, {x.algebra.d}]")
    return Multivector(x.algebra, {m: v for m, v in x.coeffs.items() if popcount(m) == k}, x.mode)


def sandwich(alg: Algebra, r: Multivector, x: Multivector) -> Multivector:
    """r x reverse(r); warns if the result leaves the grade set of ``x``."""
    out = product(alg, ProductKind.GP, product(alg, ProductKind.GP, r, x), reverse(r))
    odd = any(g & 1 for g in r.grade_set())
    if odd or not out.grade_set() <= x.grade_set():
        warnings.warn(
            f"sandwich is not grade preserving: operand grades {sorted(x.grade_set())}, "
            f"result grades {sorted(out.grade_set())}, rotor grades {sorted(r.grade_set())}",
            GradePreservationWarning,
            stacklevel=2,
        )
    return out


def norm_squared(alg: Algebra, x: Multivector) -> Scalar:
    """Scalar part of x * reverse(x), signed."""
    return product(alg, ProductKind.GP, x, reverse(x))[0]


def norm(alg: Algebra, x: Multivector) -> Scalar:
    """sqrt(|<x reverse(x)>_0|); exact in exact mode when the square is a rational square."""
    return exact_sqrt(abs(norm_squared(alg, x)))


def ideal_norm_squared(alg: Algebra, x: Multivector) -> Scalar:
    """Sum of squared coefficients on blades that contain a degenerate generator."""
    total = _coerce(0, x.mode)
    for m, v in x.coeffs.items():
        if m & alg.degenerate_mask:
            total += v * v
    return total


def ideal_norm(alg: Algebra, x: Multivector) -> Scalar:
    return exact_sqrt(ideal_norm_squared(alg, x))


def complement(x: Multivector) -> Multivector:
    """Non-metric right complement: blade ^ complement(blade) = +pseudoscalar."""
    alg = x.algebra
    full = alg.pseudoscalar
    return Multivector(alg, {full ^ m: v * alg.complement_sign(m) for m, v in x.coeffs.items()}, x.mode)


def uncomplement(x: Multivector) -> Multivector:
    """Inverse of :func:`complement`."""
    alg = x.algebra
    full = alg.pseudoscalar
    return Multivector(alg, {full ^ m: v * alg.uncomplement_sign(m) for m, v in x.coeffs.items()}, x.mode)


def all_signatures(max_d: int, min_d: int = 0) -> Iterable[Signature]:
    """Every (p, q, r) with min_d <= p+q+r <= max_d."""
    for d in range(min_d, max_d + 1):
        for r in range(d + 1):
            for q in range(d - r + 1):
                yield Signature(d - q - r, q, r)
