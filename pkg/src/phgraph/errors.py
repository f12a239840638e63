"""Exception types shared across the toolkit."""


class PhgError(Exception):
    """Base class. ``code`` is the machine-readable diagnostic name."""

    code = "PhgError"

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = context


class DimensionCeilingExceeded(PhgError):
    code = "DimensionCeilingExceeded"


class AlgebraMismatch(PhgError):
    code = "AlgebraMismatch"


class ModeMismatch(PhgError):
    code = "ModeMismatch"


class ModeError(PhgError):
    code = "ModeError"


class GradeOutOfRange(PhgError):
    code = "GradeOutOfRange"


class GradeMismatch(PhgError):
    code = "GradeMismatch"


class UnknownNode(PhgError):
    code = "UnknownNode"


class CycleIntroduced(PhgError):
    code = "CycleIntroduced"


class ArityMismatch(PhgError):
    code = "ArityMismatch"


class StructuralZeroKernel(PhgError):
    code = "StructuralZeroKernel"


class MissingSlot(PhgError):
    code = "MissingSlot"


class DuplicateVertex(PhgError):
    code = "DuplicateVertex"


class TooManyVertices(PhgError):
    code = "TooManyVertices"


class PlacementFailed(PhgError):
    code = "PlacementFailed"


class UnboundInput(PhgError):
    code = "UnboundInput"


class StalledGraph(PhgError):
    code = "StalledGraph"


class NormAtZero(PhgError):
    code = "NormAtZero"


class ProgramError(PhgError):
    """Parse/validation failure with a source location."""

    def __init__(self, code: str, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {code}: {message}")
        self.code = code
        self.detail = message
        self.line = line
        self.col = col
