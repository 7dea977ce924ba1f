"""Exception hierarchy. The CLI maps these onto exit codes."""

from __future__ import annotations


class VatScmError(Exception):
    """Base class for all errors raised by the package."""


class DataError(VatScmError, ValueError):
    """Malformed or inconsistent input data."""


class CoverageError(DataError):
    """A series does not cover a requested month range."""

    def __init__(self, series_id: str, missing: list) -> None:
        self.series_id = series_id
        self.missing = list(missing)
        shown = ", ".join(str(m) for m in self.missing[:12])
        if len(self.missing) > 12:
            shown += f", ... ({len(self.missing)} months)"
        super().__init__(f"series {series_id!r} has no observations for: {shown}")


class ConfigError(VatScmError, ValueError):
    """Invalid pipeline configuration.

    ``field`` names the offending key when the problem is semantic,
    ``line`` carries the position when the file failed to parse.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None) -> None:
        self.field = field
        self.line = line
        prefix = ""
        if field is not None:
            prefix = f"{field}: "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class ConvergenceError(VatScmError, RuntimeError):
    """The weight solver hit its iteration budget.

    Carries the best iterate found so callers can inspect or accept it.
    """

    def __init__(self, message: str, weights, objective: float, kkt_residual: float, iterations: int) -> None:
        super().__init__(message)
        self.weights = weights
        self.objective = objective
        self.kkt_residual = kkt_residual
        self.iterations = iterations
