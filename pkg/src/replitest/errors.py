"""Exception hierarchy shared by every module."""


class ReplitestError(Exception):
    """Base class for library errors."""


class ParameterError(ReplitestError, ValueError):
    """A parameter lies outside its documented range."""


class DimensionError(ParameterError):
    """Two objects that must share a domain or dimension do not."""


class SupportError(ReplitestError, ValueError):
    """A value is undefined on the given supports (e.g. KL with q_i = 0 < p_i)."""


class PreconditionError(ReplitestError, ValueError):
    """An operation was called outside its precondition."""


class ContractError(ReplitestError, TypeError):
    """An object does not satisfy the interface contract an operation needs."""


class UnreachableBreakpointError(ReplitestError):
    """No sample count up to the search limit reaches the requested ratio."""


class SamplingError(ReplitestError):
    """A sample stream could not supply the requested samples."""


class CapacityError(ReplitestError):
    """The requested computation is too large to run exactly."""


class ConvergenceError(ReplitestError, ArithmeticError):
    """An iterative method did not converge; ``estimate`` holds the best value seen."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class TrialError(ReplitestError):
    """A tester failed inside an experiment; ``trial`` is the failing index."""

    def __init__(self, trial, cause):
        super().__init__(f"trial {trial} failed: {cause!r}")
        self.trial = trial
        self.cause = cause
