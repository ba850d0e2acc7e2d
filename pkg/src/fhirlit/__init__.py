"""Converse with FHIR health records through an LLM.

Parses FHIR R4 bundles into typed envelopes, filters them into an
identifier-triplet catalog, resolves LLM function calls into sub-100-word
resource summaries, and drives a scripted Q1-Q7 evaluation protocol with
transcript recording and variability analytics.
"""

from .backend import (
    BackendConfig,
    CallTool,
    ChatMessage,
    CompletionResult,
    EmitText,
    MockBackend,
    OpenAIBackend,
    ToolCallRequest,
    ToolSpec,
)
from .chat import ChatSession, SessionConfig, SessionEvent, ask, clear, new_session
from .evaluation import (
    QuestionSet,
    RunPlan,
    ScoreSheet,
    aggregate_scores,
    run_plan,
    select_cohort,
    variability_analysis,
)
from .fhir_model import (
    Bundle,
    CodedValue,
    PatientSummary,
    ResourceEnvelope,
    ResourceKind,
    parse_bundle,
    patient_demographics,
)
from .pipeline import (
    Catalog,
    FilterConfig,
    ResourceIdentifier,
    build_catalog,
    compute_identifier,
    filter_medications,
    latest_per_code,
)
from .summarize import (
    ResourceInterpretation,
    ResourceSummary,
    SummaryCache,
    interpret_resource,
    summarize_resource,
)

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "Bundle",
    "CallTool",
    "Catalog",
    "ChatMessage",
    "ChatSession",
    "CodedValue",
    "CompletionResult",
    "EmitText",
    "FilterConfig",
    "MockBackend",
    "OpenAIBackend",
    "PatientSummary",
    "QuestionSet",
    "ResourceEnvelope",
    "ResourceIdentifier",
    "ResourceInterpretation",
    "ResourceKind",
    "ResourceSummary",
    "RunPlan",
    "ScoreSheet",
    "SessionConfig",
    "SessionEvent",
    "SummaryCache",
    "ToolCallRequest",
    "ToolSpec",
    "aggregate_scores",
    "ask",
    "build_catalog",
    "clear",
    "compute_identifier",
    "filter_medications",
    "interpret_resource",
    "latest_per_code",
    "new_session",
    "parse_bundle",
    "patient_demographics",
    "run_plan",
    "select_cohort",
    "summarize_resource",
    "variability_analysis",
]
