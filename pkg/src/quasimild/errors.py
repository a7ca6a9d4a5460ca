"""Exception hierarchy shared by all modules."""


class QuasimildError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(QuasimildError, ValueError):
    """Invalid grid, mesh, or experiment configuration."""


class ParameterConditionError(QuasimildError, ValueError):
    """A model parameter violates a structural condition."""

    def __init__(self, condition, detail=""):
        self.condition = condition
        self.detail = detail
        msg = f"parameter condition violated: {condition}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class AssemblyError(QuasimildError):
    """Operator assembly failed at a specific grid edge."""

    def __init__(self, message, edge=None):
        self.edge = edge
        super().__init__(message if edge is None else f"{message} at edge {edge}")


class DomainError(QuasimildError, ValueError):
    """Fractional power requested for an operator outside its domain of definition."""


class BuildError(QuasimildError):
    """Evolution family construction failed."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"{message} at step {step}")


class SolverError(QuasimildError):
    """A time stepper failed (singular system, invalid input)."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"{message} at step {step}")


class BlowUpError(SolverError):
    """State left the admissible region (non-finite or above the blow-up guard)."""


class FixedPointError(SolverError):
    """Picard iteration did not reach the tolerance."""

    def __init__(self, message, last_iterates=None, ratios=()):
        self.last_iterates = last_iterates
        self.ratios = tuple(ratios)
        super().__init__(message)
