"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class DaeStructError(Exception):
    code = "error"


class InvalidMatrix(DaeStructError):
    code = "InvalidMatrix"


class ShapeMismatch(DaeStructError):
    code = "ShapeMismatch"


class SingularPencil(DaeStructError):
    code = "SingularPencil"


class NotConnected(DaeStructError):
    code = "NotConnected"


class InvalidBranch(DaeStructError):
    code = "InvalidBranch"


class Unclassified(DaeStructError):
    code = "Unclassified"


class GaugeError(DaeStructError):
    code = "GaugeError"


class InvalidMaterial(DaeStructError):
    code = "InvalidMaterial"


class BuildError(DaeStructError):
    code = "BuildError"


class AssumptionViolated(DaeStructError):
    code = "AssumptionViolated"


class DegenerateDevice(DaeStructError):
    code = "DegenerateDevice"


class IncompleteModel(DaeStructError):
    code = "IncompleteModel"


class ReductionUnavailable(DaeStructError):
    code = "ReductionUnavailable"


class StepFailure(DaeStructError):
    code = "StepFailure"


class ParseError(DaeStructError):
    code = "ParseError"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
