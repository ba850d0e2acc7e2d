"""The all-resources chat loop.

A session starts from a two-message prefix (system prompt, injected patient
record), exposes the catalog through one ``get_resources`` tool, and loops on
the backend until it produces assistant text or the tool-iteration cap is
reached. Everything observable is also appended to an event log, which is the
canonical transcript format of the evaluation harness.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import date
from importlib import resources as importlib_resources
from typing import Callable

from .backend import (
    Backend,
    ChatMessage,
    CompletionResult,
    ToolCallRequest,
    ToolSpec,
    assistant,
    system,
    tool_result,
    user,
)
from .errors import BackendError, SessionBusyError
from .fhir_model import Bundle, PATIENT
from .pipeline import Catalog, FilterConfig, build_catalog
from .summarize import SummaryCache, summarize_resource

TOOL_NAME = "get_resources"

FALLBACK_REPLY = (
    "I am sorry, but I could not gather the information needed to answer your "
    "question this time. Please ask again, or bring the question to your care team."
)

_NO_SUCH_RESOURCE = "no_such_resource"


def default_system_prompt_template() -> str:
    """The packaged chat prompt template (an editable text asset)."""
    return (
        importlib_resources.files("fhirlit")
        .joinpath("prompts/chat_system.txt")
        .read_text(encoding="utf-8")
    )


@dataclass
class SessionConfig:
    """Per-session settings: locale, loop cap, prompt template, backends."""

    backend: Backend
    locale: str = "en-US"
    max_tool_iterations: int = 10
    system_prompt_template: str | None = None
    summary_backend: Backend | None = None
    summary_cache: SummaryCache | None = None

    def __post_init__(self) -> None:
        if self.max_tool_iterations < 1:
            raise ValueError("max_tool_iterations must be >= 1")


@dataclass(frozen=True)
class SessionEvent:
    """One observable session occurrence.

    ``timestamp`` is the session's logical clock (a per-session sequence
    number), which keeps event logs monotone and byte-identical across
    reruns; wall-clock times belong to run metadata, not transcripts.
    """

    kind: str
    payload: str
    timestamp: int

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "payload": self.payload, "timestamp": self.timestamp},
            ensure_ascii=False,
        )


@dataclass
class ChatSession:
    session_id: str
    messages: list[ChatMessage]
    catalog: Catalog
    config: SessionConfig
    tools: list[ToolSpec] = field(default_factory=list)
    event_log: list[SessionEvent] = field(default_factory=list)
    subscribers: list[Callable[[SessionEvent], None]] = field(default_factory=list)
    _seq: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def emit(self, kind: str, payload: str) -> SessionEvent:
        event = SessionEvent(kind=kind, payload=payload, timestamp=self._seq)
        self._seq += 1
        self.event_log.append(event)
        for subscriber in list(self.subscribers):
            subscriber(event)
        return event

    @property
    def summary_cache(self) -> SummaryCache:
        if self.config.summary_cache is None:
            self.config.summary_cache = SummaryCache()
        return self.config.summary_cache


def build_resource_tool(catalog: Catalog) -> ToolSpec:
    """The single registered tool: batch lookup of catalog identifiers."""
    names = catalog.rendered_names()
    choices = names + catalog.kinds_present()
    return ToolSpec(
        name=TOOL_NAME,
        description=(
            "Retrieve plain-language summaries of the patient's health records. "
            "Each identifier is a triplet '<resource type> | <display name> | <date>' "
            "(date may be 'unknown'). Pass one or more identifiers from the allowed "
            "list; passing a bare resource type name selects every record of that type."
        ),
        parameter_schema={
            "type": "object",
            "properties": {
                "names": {
                    "type": "array",
                    "description": "Identifiers (or resource type names) to look up.",
                    "items": {"type": "string", "enum": choices},
                    "minItems": 1,
                }
            },
            "required": ["names"],
        },
    )


def _patient_record_message(session_catalog: Catalog, bundle: Bundle) -> ChatMessage:
    patient = session_catalog.patient
    raw_patient = bundle.by_kind(PATIENT)[0].raw
    lines = [
        "Patient record:",
        f"Name: {patient.display_name}",
        f"Gender: {patient.administrative_gender}",
        f"Birth date: {patient.birth_date.isoformat() if patient.birth_date else 'unknown'}",
        f"Age: {patient.age_years} years",
        f"Known allergy records: {patient.allergies_count}",
        "",
        "Full FHIR Patient resource:",
        json.dumps(raw_patient, ensure_ascii=False, indent=2),
    ]
    return system("\n".join(lines))


def new_session(
    bundle: Bundle,
    config: SessionConfig,
    filter_config: FilterConfig | None = None,
    reference_date: date | None = None,
    session_id: str = "session",
) -> ChatSession:
    """Start a chat session: build the catalog and the two-message prefix."""
    catalog = build_catalog(bundle, filter_config, reference_date)
    template = config.system_prompt_template or default_system_prompt_template()
    prefix = [
        system(template.replace("{locale}", config.locale)),
        _patient_record_message(catalog, bundle),
    ]
    return ChatSession(
        session_id=session_id,
        messages=prefix,
        catalog=catalog,
        config=config,
        tools=[build_resource_tool(catalog)],
    )


def _resolve_names(session: ChatSession, names: list[str]) -> str:
    """Resolve requested identifiers to summaries; unknown names get a
    machine-readable note instead of an error so the model can self-correct."""
    catalog = session.catalog
    by_rendered = {identifier.rendered(): envelope for identifier, envelope in catalog.entries}
    by_kind: dict[str, list] = {}
    by_display: dict[str, list] = {}
    for identifier, envelope in catalog.entries:
        by_kind.setdefault(identifier.kind.name, []).append(envelope)
        by_display.setdefault(identifier.display_name, []).append(envelope)

    backend = session.config.summary_backend or session.config.backend
    results = []
    for name in names:
        envelopes = []
        if name in by_rendered:
            envelopes = [by_rendered[name]]
        elif name in by_kind:
            envelopes = by_kind[name]
        elif len(by_display.get(name, [])) == 1:
            envelopes = by_display[name]
        if not envelopes:
            results.append({"name": name, "error": _NO_SUCH_RESOURCE})
            continue
        for envelope in envelopes:
            summary = summarize_resource(
                envelope, backend, locale=session.config.locale, cache=session.summary_cache
            )
            results.append({"name": name, "summary": summary.summary_text})
    return json.dumps({"results": results}, ensure_ascii=False)


def _handle_tool_calls(session: ChatSession, calls: tuple[ToolCallRequest, ...]) -> None:
    session.messages.append(assistant(tool_calls=calls))
    for call in calls:
        session.emit(
            "tool_call",
            json.dumps(
                {"id": call.id, "tool_name": call.tool_name, "arguments": call.arguments},
                ensure_ascii=False,
            ),
        )
        names = call.arguments.get("names", []) if call.tool_name == TOOL_NAME else []
        if call.tool_name != TOOL_NAME:
            content = json.dumps({"error": f"unknown tool {call.tool_name!r}"}, ensure_ascii=False)
        else:
            content = _resolve_names(session, [str(n) for n in names])
        session.messages.append(tool_result(call.id, content))
        session.emit("tool_result", content)


def ask(session: ChatSession, user_text: str) -> str:
    """Ask one question and run the tool loop until assistant text arrives.

    Bounded by ``max_tool_iterations`` tool rounds (at most cap+1 backend
    calls); at the cap the reply degrades to an apologetic fallback and the
    session stays usable. Backend failures emit an ``error`` event and
    re-raise.
    """
    if not user_text:
        raise ValueError("user_text must be non-empty")
    if not session._lock.acquire(blocking=False):
        raise SessionBusyError(f"session {session.session_id} already has a message in flight")
    try:
        session.emit("user_message", user_text)
        session.messages.append(user(user_text))
        # The catalog is immutable for the session's lifetime, so the tool
        # registered at construction is re-sent verbatim on every wire call.
        tools = session.tools

        chunks_emitted = False

        def on_chunk(chunk: str) -> None:
            nonlocal chunks_emitted
            chunks_emitted = True
            session.emit("assistant_chunk", chunk)

        for iteration in range(session.config.max_tool_iterations + 1):
            try:
                result: CompletionResult = session.config.backend.complete(
                    session.messages, tools, on_chunk=on_chunk
                )
            except BackendError as exc:
                session.emit("error", json.dumps({"code": exc.code, "message": exc.message}))
                raise
            if not result.is_tool_calls:
                text = result.text or ""
                session.messages.append(assistant(text))
                if not chunks_emitted and text:
                    session.emit("assistant_chunk", text)
                session.emit("assistant_done", text)
                return text
            if iteration == session.config.max_tool_iterations:
                break
            try:
                _handle_tool_calls(session, result.tool_calls)
            except BackendError as exc:
                session.emit("error", json.dumps({"code": exc.code, "message": exc.message}))
                raise

        session.messages.append(assistant(FALLBACK_REPLY))
        session.emit("assistant_chunk", FALLBACK_REPLY)
        session.emit("assistant_done", FALLBACK_REPLY)
        return FALLBACK_REPLY
    finally:
        session._lock.release()


def clear(session: ChatSession) -> None:
    """Reset the conversation to the two-message prefix; catalog unchanged."""
    del session.messages[2:]
    session.emit("cleared", "")


def serialize_events(events: list[SessionEvent]) -> str:
    """Newline-delimited JSON, one event per line (the transcript format)."""
    return "".join(event.to_json() + "\n" for event in events)
