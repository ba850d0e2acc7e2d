"""Exception types shared across the package.

Every error a caller is expected to handle carries a stable machine ``code``
so the HTTP layer and the CLI can map it without string matching.
"""


class FhirlitError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


class MalformedDocumentError(FhirlitError):
    """Input is not JSON, or is JSON that cannot be read as a bundle or resource."""

    code = "malformed_document"


class NoPatientError(FhirlitError):
    """Bundle contains no Patient resource."""

    code = "no_patient"


class MultiplePatientsError(FhirlitError):
    """Bundle contains more than one Patient resource."""

    code = "multiple_patients"


class BackendError(FhirlitError):
    """Base class for chat-completion backend failures."""

    code = "backend_error"


class TransportError(BackendError):
    """Network failure, timeout, or unexpected HTTP status."""

    code = "transport"


class AuthError(BackendError):
    """Missing or rejected API credentials."""

    code = "auth"


class RateLimitedError(BackendError):
    """Rate limit still in force after the configured retries."""

    code = "rate_limited"

    def __init__(self, message: str = "", retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class MalformedReplyError(BackendError):
    """Backend reply body could not be interpreted."""

    code = "malformed_reply"


class ContextBudgetError(BackendError):
    """Pre-flight character/4 token estimate exceeds the configured budget."""

    code = "context_budget_exceeded"


class ScriptExhaustedError(BackendError):
    """Mock script ended on a tool call but another completion was requested."""

    code = "script_exhausted_without_text"


class SessionBusyError(FhirlitError):
    """A message is already in flight for this session."""

    code = "session_busy"


class EmptyInputError(FhirlitError):
    """Aggregation requested over zero score sheets."""

    code = "empty_input"


class NoGroundTruthError(FhirlitError):
    """Variability analysis requested with an empty ground-truth term list."""

    code = "no_ground_truth"


class InfeasibleError(FhirlitError):
    """Cohort constraints cannot be satisfied; names the binding constraint."""

    code = "infeasible"

    def __init__(self, binding_constraint: str, message: str = ""):
        super().__init__(message or f"infeasible: {binding_constraint}")
        self.binding_constraint = binding_constraint
