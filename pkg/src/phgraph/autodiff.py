"""Program evaluation and forward-mode directional derivatives over a PHG.

Values flow through the graph in topological order and are dropped as soon as
their last consumer has run, so live storage tracks the frontier width rather
than program length.  Tangents ride along with their primals; nothing is
recorded for a backward pass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from .algebra import (
    Algebra,
    Mode,
    Multivector,
    ProductKind,
    blade_product,
    exact_sqrt,
    grade_project,
    outer_join,
    popcount,
    product,
    reverse,
)
from .errors import GradeMismatch, ModeMismatch, NormAtZero, StalledGraph, StructuralZeroKernel, UnboundInput
from .grade import GradeSet
from .kernel import KernelIR, apply_kernel, emit_join_kernel, emit_kernel
from .phg import PRODUCT_KINDS, EdgeKind, Hyperedge, Phg

Number = Union[int, float, Fraction]


class InexactWarning(UserWarning):
    """An exact-mode value had to pass through an irrational square root."""


class ExactAccumulator:
    """Running sum with a single rounding at extraction.

    Exact mode keeps a rational; float inputs are converted exactly.  Float
    mode uses Neumaier's compensated summation.
    """

    def __init__(self, mode: Mode = Mode.EXACT):
        self.mode = Mode(mode)
        self.count = 0
        self._exact = Fraction(0)
        self._sum = 0.0
        self._comp = 0.0

    def add(self, x: Number) -> None:
        self.count += 1
        if self.mode is Mode.EXACT:
            self._exact += x if isinstance(x, Fraction) else Fraction(x)
            return
        x = float(x)
        t = self._sum + x
        if abs(self._sum) >= abs(x):
            self._comp += (self._sum - t) + x
        else:
            self._comp += (x - t) + self._sum
        self._sum = t

    def add_product(self, a: Number, b: Number) -> None:
        if self.mode is Mode.EXACT:
            a = a if isinstance(a, Fraction) else Fraction(a)
            b = b if isinstance(b, Fraction) else Fraction(b)
        self.add(a * b)

    def value(self) -> Number:
        if self.mode is Mode.EXACT:
            return self._exact
        return self._sum + self._comp

    def rounded(self) -> float:
        """The running sum rounded to float once."""
        return float(self.value())


def accumulate(acc: ExactAccumulator, terms: Iterable) -> Number:
    """Feed scalars, or (a, b) pairs meaning a*b, into ``acc`` and return its value."""
    for t in terms:
        if isinstance(t, tuple):
            acc.add_product(*t)
        else:
            acc.add(t)
    return acc.value()


@dataclass(frozen=True)
class DualMultivector:
    primal: Multivector
    tangent: Optional[Multivector] = None

    def __post_init__(self):
        if self.tangent is None:
            object.__setattr__(self, "tangent", Multivector.zero(self.primal.algebra, self.primal.mode))
        elif self.tangent.algebra is not self.primal.algebra:
            raise ValueError("primal and tangent live in different algebras")
        elif self.tangent.mode is not self.primal.mode:
            raise ModeMismatch("primal and tangent use different numeric modes")


def _scalar_weight(alg: Algebra, mask: int) -> int:
    """Scalar part of e_mask * reverse(e_mask)."""
    g = popcount(mask)
    rev = -1 if (g * (g - 1) // 2) & 1 else 1
    return blade_product(alg, mask, mask).sign * rev


def _norm_parts(alg: Algebra, x: Multivector, dx: Optional[Multivector], ideal: bool, mode: Mode):
    """(s, ds) with s the signed squared norm and ds its directional derivative."""
    s_acc, ds_acc = ExactAccumulator(mode), ExactAccumulator(mode)
    for m, v in x.coeffs.items():
        if ideal:
            if not m & alg.degenerate_mask:
                continue
            w = 1
        else:
            w = _scalar_weight(alg, m)
            if not w:
                continue
        s_acc.add_product(w * v, v)
        if dx is not None:
            ds_acc.add_product(2 * w * v, dx[m])
    return s_acc.value(), ds_acc.value()


def _sqrt(value: Number, mode: Mode) -> Number:
    r = exact_sqrt(value)
    if mode is Mode.EXACT and not isinstance(r, Fraction):
        warnings.warn(f"sqrt({value}) is irrational; exact result rounded through float", InexactWarning, stacklevel=3)
        r = Fraction(r)
    return r


class Evaluator:
    """Topological interpreter; set ``kernels=True`` to run products through emitted kernels."""

    def __init__(self, phg: Phg, kernels: bool = False):
        if phg.algebra is None:
            raise ValueError("evaluation needs an algebra declaration")
        self.phg = phg
        self.alg = phg.algebra
        self.kernels = kernels
        self.peak_live = 0
        self._cache: dict = {}
        self._defining: dict[int, Hyperedge] = {}
        for e in phg.edges:
            if e.infers and e.target not in self._defining:
                self._defining[e.target] = e

    # -- bookkeeping ----------------------------------------------------------

    def _bind(self, inputs: Mapping, mode: Optional[Mode]) -> tuple[dict[int, Multivector], Mode]:
        out = {}
        for ref, v in inputs.items():
            nid = self.phg.resolve(ref)
            if not isinstance(v, Multivector):
                v = self.alg.scalar(v, mode or (Mode.EXACT if isinstance(v, (int, Fraction)) else Mode.FLOAT))
            out[nid] = v
        modes = {v.mode for v in out.values()}
        if len(modes) > 1:
            raise ModeMismatch("inputs mix float and exact values")
        mode = mode or (modes.pop() if modes else Mode.FLOAT)
        return {k: v.as_mode(mode) for k, v in out.items()}, mode

    def _plan(self, bound: Mapping[int, object], keep: Optional[Iterable]) -> tuple[list[int], dict[int, int], set[int]]:
        order = self.phg.topological_order()
        if len(order) != len(self.phg.nodes):
            raise StalledGraph("graph has nodes that can never be evaluated")
        for n in order:
            if n in self._defining:
                continue
            if n not in bound and self.phg.outgoing(n):
                raise UnboundInput(f"input {self.phg.nodes[n].name!r} has no value")
        uses = {n: 0 for n in order}
        for e in self._defining.values():
            for s in set(e.sources):
                uses[s] += 1
        if keep is None:
            retain = {n for n in order if not self.phg.outgoing(n)}
        else:
            retain = {self.phg.resolve(k) for k in keep}
        order = [n for n in order if n in self._defining or n in bound]
        return order, uses, retain

    # -- primal ops -------------------------------------------------------------

    def _kernel(self, key, build) -> Optional[KernelIR]:
        if key not in self._cache:
            try:
                self._cache[key] = build()
            except StructuralZeroKernel:
                self._cache[key] = None
        return self._cache[key]

    def _product(self, kind: ProductKind, x: Multivector, y: Multivector) -> Multivector:
        if not self.kernels:
            return product(self.alg, kind, x, y)
        P, Q = GradeSet.of(x.grade_set()), GradeSet.of(y.grade_set())
        if P.unknown or Q.unknown:
            return Multivector.zero(self.alg, x.mode)
        kir = self._kernel((kind, P, Q), lambda: emit_kernel(self.alg, kind, P, Q))
        return Multivector.zero(self.alg, x.mode) if kir is None else apply_kernel(kir, [x, y])

    def _join(self, xs: list[Multivector]) -> Multivector:
        if not self.kernels:
            return outer_join(self.alg, xs)
        if all(x.grade_set() == {1} for x in xs):
            k = len(xs) - 1
            if k + 1 > self.alg.d:
                return Multivector.zero(self.alg, xs[0].mode)
            kir = self._kernel(("join", k), lambda: emit_join_kernel(self.alg, k))
            return apply_kernel(kir, xs)
        acc = xs[0]
        for x in xs[1:]:
            acc = self._product(ProductKind.OUTER, acc, x)
        return acc

    def _apply(self, e: Hyperedge, xs: list[Multivector]) -> Multivector:
        alg, k = self.alg, e.kind
        if k in PRODUCT_KINDS:
            return self._product(PRODUCT_KINDS[k], xs[0], xs[1])
        if k is EdgeKind.JOIN:
            return self._join(xs)
        if k is EdgeKind.SANDWICH:
            r, x = xs
            return self._product(ProductKind.GP, self._product(ProductKind.GP, r, x), reverse(r))
        if k is EdgeKind.GRADE_SELECT:
            return grade_project(xs[0], e.payload["grade"])
        if k is EdgeKind.NORM:
            x = xs[0]
            s, _ = _norm_parts(alg, x, None, e.payload["ideal"], x.mode)
            n = _sqrt(abs(s), x.mode)
            return alg.scalar(n * _scale(e, x.mode), x.mode)
        raise AssertionError(k)

    def _tangent(self, e: Hyperedge, xs: list[Multivector], dxs: list[Multivector], out: Multivector) -> Multivector:
        alg, k = self.alg, e.kind
        if k in PRODUCT_KINDS:
            kind = PRODUCT_KINDS[k]
            return product(alg, kind, dxs[0], xs[1]) + product(alg, kind, xs[0], dxs[1])
        if k is EdgeKind.JOIN:
            total = Multivector.zero(alg, xs[0].mode)
            for i in range(len(xs)):
                if dxs[i].is_zero():
                    continue
                total = total + outer_join(alg, xs[:i] + [dxs[i]] + xs[i + 1:])
            return total
        if k is EdgeKind.SANDWICH:
            (r, x), (dr, dx) = xs, dxs
            gp = lambda a, b: product(alg, ProductKind.GP, a, b)  # noqa: E731
            rr = reverse(r)
            return gp(gp(dr, x), rr) + gp(gp(r, dx), rr) + gp(gp(r, x), reverse(dr))
        if k is EdgeKind.GRADE_SELECT:
            return grade_project(dxs[0], e.payload["grade"])
        if k is EdgeKind.NORM:
            x, dx = xs[0], dxs[0]
            mode = x.mode
            s, ds = _norm_parts(alg, x, dx, e.payload["ideal"], mode)
            if s == 0:
                raise NormAtZero(f"norm of {self.phg.nodes[e.sources[0]].name!r} is zero; its derivative is undefined")
            n = out[0] / _scale(e, mode)
            dn = ds / (2 * n) if s > 0 else -ds / (2 * n)
            return alg.scalar(dn * _scale(e, mode), mode)
        raise AssertionError(k)

    # -- drivers ------------------------------------------------------------------

    def run(self, inputs: Mapping, keep: Optional[Iterable] = None, mode: Optional[Mode] = None) -> dict[int, Multivector]:
        duals = self._run(inputs, None, keep, mode)
        return {n: d.primal for n, d in duals.items()}

    def forward(self, inputs: Mapping, direction: Mapping, keep: Optional[Iterable] = None, mode: Optional[Mode] = None) -> dict[int, DualMultivector]:
        return self._run(inputs, direction, keep, mode)

    def _run(self, inputs, direction, keep, mode) -> dict[int, DualMultivector]:
        bound, mode = self._bind(inputs, mode)
        tangents: dict[int, Multivector] = {}
        if direction is not None:
            tangents, _ = self._bind(direction, mode)
            for n in tangents:
                if n not in bound:
                    raise UnboundInput(f"direction given for {self.phg.nodes[n].name!r}, which has no input value")
        order, uses, retain = self._plan(bound, keep)
        live: dict[int, DualMultivector] = {}
        result: dict[int, DualMultivector] = {}
        self.peak_live = 0
        zero = Multivector.zero(self.alg, mode)
        for n in order:
            e = self._defining.get(n)
            if e is None:
                val = DualMultivector(bound[n], tangents.get(n, zero) if direction is not None else zero)
            else:
                xs = [live[s].primal for s in e.sources]
                out = self._apply(e, xs)
                if direction is not None:
                    dxs = [live[s].tangent for s in e.sources]
                    if all(d.is_zero() for d in dxs):
                        dt = zero
                    else:
                        dt = self._tangent(e, xs, dxs, out)
                else:
                    dt = zero
                val = DualMultivector(out, dt)
                for s in set(e.sources):
                    uses[s] -= 1
                    if uses[s] == 0 and s not in retain:
                        del live[s]
            if n in retain:
                result[n] = val
            if uses[n] > 0 or n in retain:
                live[n] = val
            self.peak_live = max(self.peak_live, len(live))
        return result


def _scale(e: Hyperedge, mode: Mode) -> Number:
    sc = e.payload.get("scale", 1)
    return Fraction(sc) if mode is Mode.EXACT else float(sc)


def evaluate(phg: Phg, inputs: Mapping, kernels: bool = False, keep: Optional[Iterable] = None, mode: Optional[Mode] = None) -> dict[int, Multivector]:
    """Values of the retained nodes (sinks by default) for the given input bindings."""
    return Evaluator(phg, kernels).run(inputs, keep, mode)


def directional_derivative(phg: Phg, inputs: Mapping, direction: Mapping, keep: Optional[Iterable] = None, mode: Optional[Mode] = None) -> dict[int, Multivector]:
    """Tangent of every retained node along ``direction`` (unlisted inputs get zero)."""
    duals = Evaluator(phg).forward(inputs, direction, keep, mode)
    return {n: d.tangent for n, d in duals.items()}


def check_values_against_grades(phg: Phg, values: Mapping[int, Multivector]) -> None:
    """Raise GradeMismatch if an input value carries grades its node does not declare."""
    for nid, v in values.items():
        declared = phg.nodes[nid].declared_grades
        if declared.unknown or v.is_zero():
            continue
        extra = v.grade_set() - set(declared)
        if extra:
            raise GradeMismatch(f"value for {phg.nodes[nid].name!r} has grades {sorted(extra)} outside {declared}")

