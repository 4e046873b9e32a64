"""Exception types raised by hetacc."""


class HetaccError(Exception):
    """Base class for all library errors."""


class InvariantError(HetaccError, ValueError):
    """A value violates a documented invariant."""

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class ParseError(HetaccError, ValueError):
    pass


class UnknownModelError(HetaccError, KeyError):
    pass


class GraphError(HetaccError, ValueError):
    pass


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        path = " -> ".join(str(v) for v in self.cycle)
        super().__init__(f"dependency cycle: {path}")


class DanglingEdgeError(GraphError):
    pass


class SelfEdgeError(GraphError):
    pass


class CalibrationError(HetaccError):
    def __init__(self, message, best_residual=None):
        self.best_residual = best_residual
        if best_residual is not None:
            message = f"{message} (best residual {best_residual:.6g})"
        super().__init__(message)


class InfeasibleError(HetaccError):
    """No configuration satisfies the resource budget."""
