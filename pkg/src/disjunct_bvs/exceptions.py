"""
Custom exceptions for disjunct-bvs.

Every error carries a stable machine-readable ``code``, a ``details`` dict for
reports, and the process ``exit_code`` the CLI maps it to:

- 2: the input, the configuration or a hyperparameter choice is invalid
- 3: a numerical routine failed (rejection cap, quadrature, non-finite value)
"""

from typing import Any, Dict, Optional


class BVSError(Exception):
    """Base exception for all disjunct-bvs errors."""

    exit_code: int = 1

    def __init__(
        self,
        message: str,
        code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.message = message
        self.code = code or "BVS_ERROR"
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for JSON error output."""
        return {
            "error": self.code,
            "message": self.message,
            "details": self.details,
        }


class InvalidArgumentError(BVSError, ValueError):
    """
    Raised when an operation receives an argument outside its domain.

    Common causes:
    - Non-finite mean or variance
    - A point-mass region passed where a density is needed
    - Non-positive degrees of freedom or scale
    """

    exit_code = 2

    def __init__(
        self,
        message: str,
        argument: Optional[str] = None,
        value: Any = None,
    ) -> None:
        details: Dict[str, Any] = {}
        if argument:
            details["argument"] = argument
        if value is not None:
            details["value"] = repr(value)

        super().__init__(
            message=message,
            code="INVALID_ARGUMENT",
            details=details,
        )
        self.argument = argument
        self.value = value


class ConfigurationError(BVSError):
    """
    Raised when prior, sampler or run configuration is invalid.
    """

    exit_code = 2

    def __init__(self, message: str, config_key: Optional[str] = None) -> None:
        super().__init__(
            message=message,
            code="CONFIGURATION_ERROR",
            details={"configKey": config_key} if config_key else {},
        )
        self.config_key = config_key


class DataParseError(BVSError):
    """
    Raised when an input CSV cannot be read as a numeric table.

    ``row`` is 1-based and counts the header as row 1, so it matches what a
    text editor shows.
    """

    exit_code = 2

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        column: Optional[str] = None,
    ) -> None:
        details: Dict[str, Any] = {}
        if row is not None:
            details["row"] = row
        if column is not None:
            details["column"] = column

        super().__init__(
            message=message,
            code="PARSE_ERROR",
            details=details,
        )
        self.row = row
        self.column = column


class DataValidationError(BVSError):
    """
    Raised when data parsed fine but cannot be used.

    Common causes:
    - Constant covariate column (zero variance cannot be standardized)
    - Sufficient statistics inconsistent with the design matrix
    - Shape mismatch between X and y
    """

    exit_code = 2

    def __init__(self, message: str, column: Optional[str] = None) -> None:
        super().__init__(
            message=message,
            code="VALIDATION_ERROR",
            details={"column": column} if column else {},
        )
        self.column = column


class CalibrationInfeasibleError(BVSError):
    """
    Raised when no spike variance can match the slab density at delta.

    The truncated spike density at its boundary never exceeds ``1/(2*delta)``,
    so a slab density at or above that value has no solution.
    """

    exit_code = 2

    def __init__(self, delta: float, slab_density: float) -> None:
        supremum = 1.0 / (2.0 * delta)
        super().__init__(
            message=(
                f"Cannot calibrate spike variance for delta={delta}: slab density "
                f"{slab_density:.6g} >= spike supremum {supremum:.6g}"
            ),
            code="CALIBRATION_INFEASIBLE",
            details={
                "delta": delta,
                "slabDensity": slab_density,
                "spikeSupremum": supremum,
            },
        )
        self.delta = delta
        self.slab_density = slab_density
        self.spike_supremum = supremum


class NumericalFailureError(BVSError):
    """
    Raised when a numerical routine cannot deliver its contract.

    Common causes:
    - Rejection sampler exceeded its proposal cap
    - Quadrature did not converge
    - Non-finite intermediate in a conditional weight
    """

    exit_code = 3

    def __init__(
        self,
        message: str,
        operation: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ) -> None:
        details: Dict[str, Any] = dict(context or {})
        if operation:
            details["operation"] = operation

        super().__init__(
            message=message,
            code="NUMERICAL_FAILURE",
            details=details,
        )
        self.operation = operation
        self.context = context or {}


class ChainAbortedError(NumericalFailureError):
    """
    Raised when a Gibbs chain stops on a numerical failure.

    The original failure is kept as ``cause`` and its details are merged in.
    """

    def __init__(self, iteration: int, cause: NumericalFailureError) -> None:
        super().__init__(
            message=f"Chain aborted at iteration {iteration}: {cause.message}",
            operation="run_chain",
            context={**cause.details, "iteration": iteration},
        )
        self.code = "CHAIN_ABORTED"
        self.iteration = iteration
        self.cause = cause
