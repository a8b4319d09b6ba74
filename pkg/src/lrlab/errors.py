"""Exception types raised across the package."""


class LabError(Exception):
    """Base class for all errors raised by lrlab."""


class EvaluationError(LabError, ArithmeticError):
    """A function evaluation produced a non-finite value."""


class DegenerateError(LabError, ValueError):
    """A projection or average collapsed to the zero vector."""


class DivergedError(LabError, ArithmeticError):
    """Training produced NaN/Inf; distinct from behavioral (regime 3) divergence."""


class PreconditionError(LabError, ValueError):
    pass


class BracketError(PreconditionError):
    pass


class NotReachedError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    pass


class CheckpointError(LabError, IOError):
    pass


class FormatError(LabError, ValueError):
    pass
