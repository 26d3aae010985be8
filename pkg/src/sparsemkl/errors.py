"""Exception hierarchy for sparsemkl."""


class SparseMKLError(Exception):
    """Base class for all errors raised by this package."""

    #: short machine-readable tag used in CLI error objects
    kind = "error"


class ValidationError(SparseMKLError, ValueError):
    kind = "validation"


class ParseError(ValidationError):
    kind = "parse"


class DegenerateKernelError(SparseMKLError, ValueError):
    kind = "degenerate_kernel"


class PSDViolationError(SparseMKLError, ValueError):
    kind = "psd_violation"


class DomainError(SparseMKLError, ValueError):
    kind = "domain"


class PreconditionError(DomainError):
    """A theorem precondition does not hold; ``clause`` names it."""

    kind = "precondition"

    def __init__(self, clause, message=None):
        self.clause = clause
        super().__init__(message or f"precondition violated: {clause}")


class NonConvergenceError(SparseMKLError, RuntimeError):
    """Inner solver hit its iteration cap.

    Carries the best iterate found so far and its stationarity residual.
    """

    kind = "non_converged"

    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class EnumerationInfeasibleError(SparseMKLError, RuntimeError):
    kind = "enumeration_infeasible"


class ProbeFailedError(SparseMKLError, RuntimeError):
    kind = "probe_failed"


class InsufficientDataError(SparseMKLError, ValueError):
    kind = "insufficient_data"


class HarnessError(SparseMKLError, RuntimeError):
    kind = "harness"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
