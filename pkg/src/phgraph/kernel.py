"""Sparsity profiles from Cayley tables and straight-line product kernels.

A kernel is a single-assignment list of scalar instructions over named slots.
Operand coefficients live in ``a_<blade>`` / ``b_<blade>`` (or ``x<i>_<blade>``
for fused joins), results in ``c_<blade>``, temporaries in ``t<n>``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence, Union

from .algebra import Algebra, Mode, Multivector, ProductKind, reorder_sign
from .errors import GradeOutOfRange, MissingSlot, StructuralZeroKernel
from .grade import GradeSet


@dataclass(frozen=True)
class SparsityProfile:
    signature: str
    kind: ProductKind
    grades: tuple[int, ...]
    nonzero: int
    restricted_dense: int
    multiplies: int
    adds: int
    dense_multiplies: int
    dense_adds: int

    @property
    def reduction(self) -> float:
        """Fraction of the grade-restricted table that is structurally zero."""
        return 1 - self.nonzero / self.restricted_dense if self.restricted_dense else 0.0

    @property
    def dense_reduction(self) -> float:
        """Multiplications saved against a full 2^d x 2^d evaluation."""
        return 1 - self.multiplies / self.dense_multiplies

    def as_dict(self) -> dict:
        return {
            "algebra": self.signature,
            "kind": self.kind.value,
            "grades": list(self.grades),
            "nonzero": self.nonzero,
            "restricted_dense": self.restricted_dense,
            "multiplies": self.multiplies,
            "adds": self.adds,
            "dense_multiplies": self.dense_multiplies,
            "dense_adds": self.dense_adds,
            "reduction_pct": round(100 * self.reduction, 2),
            "dense_reduction_pct": round(100 * self.dense_reduction, 2),
        }


def _blades(alg: Algebra, grades: Union[GradeSet, Sequence[int]]) -> list[int]:
    out = []
    for g in sorted(grades):
        out.extend(alg.blades_of_grade(g))
    return sorted(out)


def contributions(alg: Algebra, kind: ProductKind, left: Sequence[int], right: Sequence[int]) -> dict[int, list[tuple[int, int, int]]]:
    """output blade -> [(a, b, sign)] for every nonzero table entry in left x right."""
    signs, masks = alg.table(kind)
    out: dict[int, list[tuple[int, int, int]]] = {}
    for a in left:
        srow, mrow = signs[a], masks[a]
        for b in right:
            s = srow[b]
            if s:
                out.setdefault(mrow[b], []).append((a, b, s))
    return dict(sorted(out.items()))


def sparsity_profile(alg: Algebra, kind: ProductKind, p: int, q: int) -> SparsityProfile:
    for g in (p, q):
        if not 0 <= g <= alg.d:
            raise GradeOutOfRange(f"grade {g} outside [0, {alg.d}]")
    kind = ProductKind(kind)
    contrib = contributions(alg, kind, alg.blades_of_grade(p), alg.blades_of_grade(q))
    nonzero = sum(len(v) for v in contrib.values())
    adds = sum(max(len(v) - 1, 0) for v in contrib.values())
    n = alg.size
    return SparsityProfile(
        signature=str(alg.signature),
        kind=kind,
        grades=(p, q),
        nonzero=nonzero,
        restricted_dense=comb(alg.d, p) * comb(alg.d, q),
        multiplies=nonzero,
        adds=adds,
        dense_multiplies=n * n,
        dense_adds=n * (n - 1),
    )


def tensor_sparsity(alg: Algebra, kind: ProductKind) -> float:
    """Zero fraction of the 2^d x 2^d x 2^d (left, right, output) product tensor."""
    signs = alg.table(kind)[0]
    nonzero = sum(1 for row in signs for s in row if s)
    return 1 - nonzero / alg.size ** 3


class Op(str, enum.Enum):
    MUL = "mul"
    ADD = "add"
    SUB = "sub"
    NEG = "neg"
    MULADD = "muladd"


@dataclass(frozen=True)
class Instr:
    dst: str
    op: Op
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.dst} = {self.op.value} " + " ".join(self.args)


@dataclass(frozen=True)
class KernelIR:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    instrs: tuple[Instr, ...]
    meta: tuple[tuple[str, str], ...] = ()

    @property
    def metadata(self) -> dict:
        return dict(self.meta)

    def tally(self) -> dict[str, int]:
        out = {op.value: 0 for op in Op}
        for ins in self.instrs:
            out[ins.op.value] += 1
        return out

    @property
    def multiplies(self) -> int:
        t = self.tally()
        return t["mul"] + t["muladd"]

    @property
    def adds(self) -> int:
        t = self.tally()
        return t["add"] + t["sub"] + t["muladd"]

    def to_text(self) -> str:
        lines = [f"# {k} {v}" for k, v in self.meta]
        lines.append("in " + " ".join(self.inputs))
        lines.append("out " + " ".join(self.outputs))
        lines.extend(str(i) for i in self.instrs)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "KernelIR":
        meta, inputs, outputs, instrs = [], (), (), []
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("# "):
                k, _, v = line[2:].partition(" ")
                meta.append((k, v))
            elif line.startswith("in "):
                inputs = tuple(line[3:].split())
            elif line.startswith("out "):
                outputs = tuple(line[4:].split())
            else:
                dst, _, rest = line.partition(" = ")
                op, *args = rest.split()
                instrs.append(Instr(dst, Op(op), tuple(args)))
        return cls(inputs, outputs, tuple(instrs), tuple(meta))

    def to_dict(self) -> dict:
        return {
            "meta": dict(self.meta),
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "counts": self.tally(),
            "instrs": [[i.dst, i.op.value, *i.args] for i in self.instrs],
        }


class _Builder:
    def __init__(self, fused: bool = False):
        self.instrs: list[Instr] = []
        self.temps = 0
        self.fused = fused

    def temp(self) -> str:
        name = f"t{self.temps}"
        self.temps += 1
        return name

    def emit(self, dst: str, op: Op, *args: str) -> str:
        self.instrs.append(Instr(dst, op, args))
        return dst

    def signed_sum(self, out: str, terms: list[tuple[str, str, int]]) -> None:
        """out = sum(sign * x * y); signs fold into sub, or a final neg when all are negative."""
        pos = [t for t in terms if t[2] > 0]
        if pos:
            first = pos[0]
            rest = [t for t in terms if t is not first]
            negate = False
        else:
            first, rest, negate = terms[0], terms[1:], True
        if not rest and not negate:
            self.emit(out, Op.MUL, first[0], first[1])
            return
        acc = self.emit(self.temp(), Op.MUL, first[0], first[1])
        for i, (x, y, s) in enumerate(rest):
            last = i == len(rest) - 1 and not negate
            plus = negate or s > 0
            if plus and self.fused:
                acc = self.emit(out if last else self.temp(), Op.MULADD, x, y, acc)
                continue
            prod = self.emit(self.temp(), Op.MUL, x, y)
            acc = self.emit(out if last else self.temp(), Op.ADD if plus else Op.SUB, acc, prod)
        if negate:
            self.emit(out, Op.NEG, acc)


def slot(prefix: str, alg: Algebra, mask: int) -> str:
    return f"{prefix}_{alg.names[mask]}"


def emit_kernel(alg: Algebra, kind: ProductKind, P: GradeSet, Q: GradeSet, fused: bool = False) -> KernelIR:
    """Straight-line kernel for ``kind`` restricted to operand grades P x Q."""
    kind = ProductKind(kind)
    if P.unknown or Q.unknown or P.zero or Q.zero:
        raise StructuralZeroKernel("operand grade sets must be known and non-zero")
    left, right = _blades(alg, P), _blades(alg, Q)
    contrib = contributions(alg, kind, left, right)
    if not contrib:
        raise StructuralZeroKernel(f"{kind.value} of grades {P} x {Q} is identically zero in {alg.signature}")
    b = _Builder(fused)
    outputs = []
    for m, terms in contrib.items():
        out = slot("c", alg, m)
        outputs.append(out)
        b.signed_sum(out, [(slot("a", alg, x), slot("b", alg, y), s) for x, y, s in terms])
    inputs = [slot("a", alg, m) for m in left] + [slot("b", alg, m) for m in right]
    meta = (("algebra", str(alg.signature)), ("kind", kind.value), ("grades", f"{P}x{Q}"))
    return KernelIR(tuple(inputs), tuple(outputs), tuple(b.instrs), meta)


def emit_join_kernel(alg: Algebra, k: int) -> KernelIR:
    """Fused outer product of k+1 grade-1 operands.

    Minors of the first j operands are built from minors of the first j-1
    (Laplace expansion along the newest operand), so each output slot is the
    (k+1)x(k+1) determinant of its generator columns with no multivector
    intermediate.
    """
    n = k + 1
    if k < 1:
        raise ValueError("a join needs at least two operands (k >= 1)")
    if n > alg.d:
        raise StructuralZeroKernel(f"join of {n} vectors vanishes in d={alg.d}")
    b = _Builder()
    gens = [1 << i for i in range(alg.d)]
    prev = {g: slot("x0", alg, g) for g in gens}
    outputs = []
    for j in range(2, n + 1):
        cur = {}
        for S in sorted(alg.blades_of_grade(j)):
            terms = []
            for g in gens:
                if S & g:
                    rest = S ^ g
                    terms.append((prev[rest], slot(f"x{j - 1}", alg, g), reorder_sign(rest, g)))
            name = slot("c", alg, S) if j == n else f"m{j}_{alg.names[S]}"
            b.signed_sum(name, terms)
            cur[S] = name
            if j == n:
                outputs.append(name)
        prev = cur
    inputs = [slot(f"x{i}", alg, g) for i in range(n) for g in gens]
    meta = (("algebra", str(alg.signature)), ("kind", "join"), ("operands", str(n)))
    return KernelIR(tuple(inputs), tuple(outputs), tuple(b.instrs), meta)


def join_kernel_counts(d: int, k: int) -> tuple[int, int]:
    """(multiplies, adds) of :func:`emit_join_kernel` by counting minors per level."""
    muls = sum(comb(d, j) * j for j in range(2, k + 2))
    adds = sum(comb(d, j) * (j - 1) for j in range(2, k + 2))
    return muls, adds


def run_kernel(kir: KernelIR, inputs: Mapping[str, object]) -> dict[str, object]:
    env = dict(inputs)
    for name in kir.inputs:
        if name not in env:
            raise MissingSlot(f"input slot {name!r} not provided")
    for ins in kir.instrs:
        a = ins.args
        op = ins.op
        if op is Op.MUL:
            env[ins.dst] = env[a[0]] * env[a[1]]
        elif op is Op.ADD:
            env[ins.dst] = env[a[0]] + env[a[1]]
        elif op is Op.SUB:
            env[ins.dst] = env[a[0]] - env[a[1]]
        elif op is Op.NEG:
            env[ins.dst] = -env[a[0]]
        else:
            env[ins.dst] = env[a[2]] + env[a[0]] * env[a[1]]
    return {o: env[o] for o in kir.outputs}


def bind(kir: KernelIR, operands: Sequence[Multivector]) -> dict[str, object]:
    """Input slot values taken from ``operands`` (prefixes a, b or x0, x1, ...)."""
    if not operands:
        return {}
    alg = operands[0].algebra
    zero = Fraction(0) if operands[0].mode is Mode.EXACT else 0.0
    prefixes = ("a", "b") if len(operands) == 2 and kir.inputs and kir.inputs[0].startswith("a_") else tuple(f"x{i}" for i in range(len(operands)))
    lookup = {p: mv for p, mv in zip(prefixes, operands)}
    values = {}
    for name in kir.inputs:
        p, _, blade = name.partition("_")
        values[name] = lookup[p].coeffs.get(alg.blade_mask(blade), zero)
    return values


def unbind(alg: Algebra, outputs: Mapping[str, object], mode: Mode) -> Multivector:
    return Multivector(alg, {alg.blade_mask(name.partition("_")[2]): v for name, v in outputs.items()}, mode)


def apply_kernel(kir: KernelIR, operands: Sequence[Multivector]) -> Multivector:
    """Run ``kir`` on multivector operands and pack the result back into a multivector."""
    alg = operands[0].algebra
    return unbind(alg, run_kernel(kir, bind(kir, operands)), operands[0].mode)

