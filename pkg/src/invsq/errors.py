"""Exception hierarchy shared by every module of the package."""


class InvsqError(Exception):
    """Base class for domain errors (the CLI maps these to exit status 1)."""


class SpecError(InvsqError):
    """Malformed potential document; carries a field path or line when known."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class QuadratureError(InvsqError):
    pass


class EigenError(InvsqError):
    pass


class ThresholdError(InvsqError):
    """An angular eigenvalue sits on the critical value -(d-2)^2/4."""


class IntegrationError(InvsqError):
    def __init__(self, message, r=None):
        self.r = r
        super().__init__(message if r is None else f"{message} (last r = {r:.6g})")


class ConvergenceError(InvsqError):
    pass


class BracketError(InvsqError):
    def __init__(self, message, n=None):
        self.n = n
        super().__init__(message if n is None else f"n={n}: {message}")


class HypothesisError(InvsqError):
    pass


class GridError(InvsqError):
    """An E grid or n range too short for the requested fit."""


class NodeError(InvsqError):
    """A matching radius falls on a node of an oscillating solution."""
