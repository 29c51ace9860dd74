"""Exception hierarchy shared by every module.

Each error carries a short machine-readable ``code`` so the command-line
runner can print one parseable line per failure.
"""

from __future__ import annotations


class PrethermalError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def machine_line(self) -> str:
        parts = [f"error={self.code}", f"message={str(self)!r}"]
        parts += [f"{k}={v!r}" for k, v in sorted(self.details.items())]
        return " ".join(parts)


class ParameterError(PrethermalError, ValueError):
    code = "parameter"


class CapacityError(PrethermalError):
    code = "capacity"


class DomainError(PrethermalError, ValueError):
    code = "domain"


class FitError(PrethermalError):
    code = "fit"


class SolverError(PrethermalError):
    code = "solver"


class QuadratureError(PrethermalError):
    code = "quadrature"


class SaddleValidityError(PrethermalError):
    code = "saddle_validity"


class BranchError(PrethermalError):
    code = "branch"


class PreconditionError(PrethermalError):
    code = "precondition"


class EmptyEnvelopeError(PrethermalError):
    code = "empty_envelope"


class NumericalStabilityError(PrethermalError):
    code = "numerical_stability"


class NumericalError(PrethermalError):
    code = "numerical"


class InvalidPlanError(PrethermalError):
    code = "invalid_plan"


class ConfigError(PrethermalError):
    code = "config"
