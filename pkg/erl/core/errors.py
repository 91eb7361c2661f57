from typing import Any, Optional, Tuple


class ERLError(Exception):
    """Base class for every error raised by erl."""


class InvalidTaskError(ERLError, ValueError):
    def __init__(self, report: Any):
        self.report = report
        super().__init__(f"Task failed validation: {report.summary()}")


class ShapeMismatchError(ERLError, ValueError):
    pass


class NumericFailureError(ERLError, ArithmeticError):
    def __init__(self, message: str, cell: Optional[Tuple[int, ...]] = None):
        self.cell = cell
        where = f" at cell {cell}" if cell is not None else ""
        super().__init__(f"{message}{where}")


class UnsolvedInputError(ERLError, ValueError):
    pass


class IncompatibleTasksError(ERLError, ValueError):
    pass


class CompositionRangeError(ERLError, ValueError):
    pass


class CoverageError(ERLError, ValueError):
    def __init__(self, missing: list):
        self.missing = missing
        preview = ", ".join(str(cell) for cell in missing[:5])
        super().__init__(f"{len(missing)} (s,a) pairs never visited in batch: {preview}")


class IdentityViolationError(ERLError):
    """A transfer identity failed its numerical check."""

    def __init__(
        self,
        identity: str,
        residual: float,
        tolerance: float,
        cell: Optional[Tuple[int, ...]] = None,
    ):
        self.identity = identity
        self.residual = residual
        self.tolerance = tolerance
        self.cell = cell
        where = f" (worst cell {cell})" if cell is not None else ""
        super().__init__(
            f"{identity} identity violated: residual {residual:.3e} > "
            f"tolerance {tolerance:.3e}{where}"
        )
