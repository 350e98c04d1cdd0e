class GridMarketError(Exception):
    """Base class for all package errors."""


class ScenarioParseError(GridMarketError):
    """Input file does not parse; message carries file/line/field context."""

    def __init__(self, message, path=None, line=None, field=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.path, self.line, self.field = path, line, field


class ValidationError(GridMarketError):
    """A domain invariant is violated."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SolverError(GridMarketError):
    pass


class InfeasibleError(SolverError):
    def __init__(self, message, bound_set=()):
        super().__init__(message)
        self.bound_set = list(bound_set)


class NonConvergenceError(SolverError):
    pass


class NumericalFailureError(SolverError):
    pass


class StaleSensitivityError(GridMarketError):
    pass


class InvariantBreach(GridMarketError):
    pass
