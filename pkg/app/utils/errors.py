"""
Exception hierarchy shared by all solver stages.

Each error carries a ``context`` dictionary (scenario, stage, cell, facet,
residual ...) so the command line layer can report where a run failed and map
the failure to an exit code.
"""
from typing import Any, Dict, Optional


class HDGError(Exception):
    """
    Root of all errors raised by the solver.
    """

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context or {})

    def with_context(self, **context: Any) -> "HDGError":
        """Attach more context (e.g. scenario name and stage) and return self."""
        for key, value in context.items():
            self.context.setdefault(key, value)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} [{details}]"


class InvalidArgumentError(HDGError, ValueError):
    """A precondition on an operation argument was violated."""


class ConfigurationError(HDGError):
    """Scenario parsing/validation failed or boundary data is incomplete."""


class NumericalError(HDGError, ArithmeticError):
    """A numerical stage failed (singular block, non-SPD system, no convergence)."""


class AssemblyError(NumericalError):
    """A local HDG block could not be built or inverted."""

    def __init__(self, message: str, cell: int, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, {"cell": cell, **(context or {})})
        self.cell = cell


class SolverError(NumericalError):
    """The global linear solve failed."""

    def __init__(self,
                 message: str,
                 residual: Optional[float] = None,
                 iterations: Optional[int] = None,
                 context: Optional[Dict[str, Any]] = None):
        extra = {}
        if residual is not None:
            extra["residual"] = f"{residual:.3e}"
        if iterations is not None:
            extra["iterations"] = iterations
        super().__init__(message, {**extra, **(context or {})})
        self.residual = residual
        self.iterations = iterations


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the process exit code.

    Returns:
    --------
    int
        2 for configuration/argument errors, 3 for numerical errors, 1 otherwise.
    """
    if isinstance(error, (ConfigurationError, InvalidArgumentError)):
        return 2
    if isinstance(error, NumericalError):
        return 3
    return 1
