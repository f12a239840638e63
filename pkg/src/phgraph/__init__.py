"""Grade-aware Clifford-algebra programs on a program hypergraph."""

from .algebra import Algebra, Mode, Multivector, ProductKind, Signature, build_algebra
from .grade import STRUCTURAL_ZERO, UNKNOWN, GradeSet
from .phg import Activation, EdgeKind, Phg, saturate

__all__ = [
    "Activation",
    "Algebra",
    "EdgeKind",
    "GradeSet",
    "Mode",
    "Multivector",
    "Phg",
    "ProductKind",
    "STRUCTURAL_ZERO",
    "Signature",
    "UNKNOWN",
    "build_algebra",
    "saturate",
]

__version__ = "0.1.0"
