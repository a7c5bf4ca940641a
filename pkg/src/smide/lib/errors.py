"""Exception hierarchy for the smide library."""

from __future__ import annotations


class SmideError(Exception):
    """Base class for every error raised by smide."""


class InvalidParameterError(SmideError, ValueError):
    """A numeric precondition on an argument does not hold."""


class KernelDomainError(SmideError):
    """A kernel was queried outside its triangle t >= tau."""


class KernelKindError(SmideError):
    """An operation needs a kernel of a different kind."""


class UnsupportedFeedbackError(SmideError):
    """The feedback law has no regularized set description."""


class SingularMatrixError(SmideError):
    """A matrix that must be inverted is (numerically) singular."""


class OffSurfaceError(SmideError):
    """The state is not on the switching surface."""


class NonFiniteStateError(SmideError):
    """A simulated state left the finite range."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f'non-finite state at step {step}')


class StabilityError(SmideError):
    """An explicit update would be unstable at the requested step size."""


class InfeasibleDesignError(SmideError):
    """A controller design condition fails."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        self.diagnostics = list(diagnostics or [message])
        super().__init__(message)


class RankError(SmideError):
    """A matrix lacks the full row rank an operation needs."""


class NotInSlidingError(SmideError):
    """The trajectory does not stay on the surface after the reaching time."""


class DegenerateOutputError(SmideError):
    """The input/output gain vanishes."""


class ConditionViolatedError(SmideError):
    """A closed-form design condition does not hold."""


class UnknownScenarioError(SmideError, KeyError):
    """No scenario is registered under the requested name."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ''


class ConfigError(SmideError):
    """A configuration file or override is invalid."""
