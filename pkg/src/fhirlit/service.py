"""HTTP service: bundle upload, catalog browsing, summaries, streaming chat.

The contract the web chat client consumes. Patients persist to the data
directory (a restart with the same directory restores catalogs and the
summary cache); sessions are in-memory with idle-TTL eviction. Request logs
carry identifiers and sizes only, never record contents or message text.
"""

from __future__ import annotations

import json
import logging
import queue
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .backend import Backend, backend_from_spec
from .chat import ChatSession, SessionConfig, SessionEvent, ask, clear, new_session
from .errors import (
    BackendError,
    FhirlitError,
    MalformedDocumentError,
    MultiplePatientsError,
    NoPatientError,
)
from .fhir_model import Bundle, parse_bundle
from .pipeline import Catalog, FilterConfig, build_catalog
from .summarize import SummaryCache, interpret_resource, summarize_resource

logger = logging.getLogger("fhirlit.service")

TERMINAL_EVENT_KINDS = {"assistant_done", "error"}


@dataclass
class ServiceConfig:
    data_dir: Path
    chat_backend_spec: dict[str, Any] = field(default_factory=lambda: {"type": "mock"})
    summary_backend_spec: dict[str, Any] | None = None
    filter_config: FilterConfig = field(default_factory=FilterConfig)
    default_locale: str = "en-US"
    max_tool_iterations: int = 10
    size_cap_bytes: int = 5 * 1024 * 1024
    session_ttl_seconds: float = 3600.0
    cors_origins: list[str] = field(default_factory=list)
    reference_date: date | None = None
    # Pre-built backend instances take precedence over the specs above
    # (embedding and tests share one backend object this way).
    chat_backend_override: Backend | None = None
    summary_backend_override: Backend | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any], data_dir: Path) -> "ServiceConfig":
        reference = data.get("reference_date")
        return cls(
            data_dir=data_dir,
            chat_backend_spec=data.get("backend", {"type": "mock"}),
            summary_backend_spec=data.get("summary_backend"),
            filter_config=FilterConfig.from_dict(data.get("filter", {})),
            default_locale=data.get("locale", "en-US"),
            max_tool_iterations=int(data.get("max_tool_iterations", 10)),
            size_cap_bytes=int(data.get("size_cap_bytes", 5 * 1024 * 1024)),
            session_ttl_seconds=float(data.get("session_ttl_seconds", 3600.0)),
            cors_origins=list(data.get("cors_origins", [])),
            reference_date=date.fromisoformat(reference) if reference else None,
        )


class ApiError(Exception):
    """Maps to one JSON error body; codes form a documented closed set."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class StoredPatient:
    patient_id: str
    bundle: Bundle
    catalog: Catalog


@dataclass
class LiveSession:
    handle_id: str
    session: ChatSession
    patient_label: str
    locale: str
    created_at: str
    last_active: float = field(default_factory=time.monotonic)
    in_flight: threading.Lock = field(default_factory=threading.Lock)


class _MessageBody(BaseModel):
    text: str


class _SessionBody(BaseModel):
    patient_id: str
    locale: str | None = None


def _demographics_dict(catalog: Catalog) -> dict[str, Any]:
    patient = catalog.patient
    return {
        "family_name": patient.family_name,
        "given_names": list(patient.given_names),
        "birth_date": patient.birth_date.isoformat() if patient.birth_date else None,
        "administrative_gender": patient.administrative_gender,
        "age_years": patient.age_years,
        "allergies_count": patient.allergies_count,
    }


def _catalog_rows(catalog: Catalog) -> list[dict[str, Any]]:
    return [
        {
            "kind": identifier.kind.name,
            "display_name": identifier.display_name,
            "date": identifier.date.date().isoformat() if identifier.date else None,
            "rendered": identifier.rendered(),
            "resource_id": envelope.logical_id,
        }
        for identifier, envelope in catalog.entries
    ]


def _kind_counts(catalog: Catalog) -> dict[str, int]:
    counts: dict[str, int] = {}
    for identifier, _ in catalog.entries:
        counts[identifier.kind.name] = counts.get(identifier.kind.name, 0) + 1
    return counts


def _sse_frame(event: SessionEvent) -> str:
    return f"id: {event.timestamp}\nevent: {event.kind}\ndata: {event.to_json()}\n\n"


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="fhirlit", version="0.1.0")
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    patients_dir = config.data_dir / "patients"
    patients_dir.mkdir(parents=True, exist_ok=True)
    state_lock = threading.Lock()
    patients: dict[str, StoredPatient] = {}
    sessions: dict[str, LiveSession] = {}
    summary_cache = SummaryCache(config.data_dir / "summary_cache.ndjson")
    chat_backend: Backend = config.chat_backend_override or backend_from_spec(
        config.chat_backend_spec
    )
    summary_backend: Backend | None = config.summary_backend_override or (
        backend_from_spec(config.summary_backend_spec) if config.summary_backend_spec else None
    )

    def load_patient(patient_id: str, raw: bytes) -> StoredPatient:
        bundle = parse_bundle(raw, source_label=patient_id)
        catalog = build_catalog(bundle, config.filter_config, config.reference_date)
        return StoredPatient(patient_id=patient_id, bundle=bundle, catalog=catalog)

    for existing in sorted(patients_dir.glob("*.json")):
        try:
            patients[existing.stem] = load_patient(existing.stem, existing.read_bytes())
        except FhirlitError:
            logger.warning("skipping unreadable stored patient id=%s", existing.stem)

    def evict_idle_sessions() -> None:
        deadline = time.monotonic() - config.session_ttl_seconds
        with state_lock:
            for session_id in [s for s, live in sessions.items() if live.last_active < deadline]:
                del sessions[session_id]

    def get_patient(patient_id: str) -> StoredPatient:
        with state_lock:
            stored = patients.get(patient_id)
        if stored is None:
            raise ApiError(404, "patient_not_found", f"no patient {patient_id!r}")
        return stored

    def get_session(session_id: str) -> LiveSession:
        evict_idle_sessions()
        with state_lock:
            live = sessions.get(session_id)
        if live is None:
            raise ApiError(404, "session_not_found", f"no session {session_id!r}")
        live.last_active = time.monotonic()
        return live

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(
        _request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(part) for part in first.get("loc", ()))
        message = f"{first.get('msg', 'invalid request body')} ({where})" if where else "invalid request body"
        return JSONResponse(status_code=400, content={"code": "invalid_request", "message": message})

    @app.middleware("http")
    async def log_requests(request: Request, call_next):
        started = time.monotonic()
        response = await call_next(request)
        logger.info(
            "%s %s -> %d (%.1f ms)",
            request.method,
            request.url.path,
            response.status_code,
            (time.monotonic() - started) * 1000,
        )
        return response

    @app.post("/patients")
    async def upload_patient(request: Request) -> dict[str, Any]:
        body = await request.body()
        logger.info("upload received bytes=%d", len(body))
        if len(body) > config.size_cap_bytes:
            raise ApiError(413, "too_large", f"body exceeds {config.size_cap_bytes} bytes")
        patient_id = secrets.token_hex(8)
        try:
            stored = load_patient(patient_id, body)
        except MalformedDocumentError as exc:
            raise ApiError(400, "malformed_document", exc.message) from exc
        except (NoPatientError, MultiplePatientsError) as exc:
            raise ApiError(422, exc.code, exc.message) from exc
        (patients_dir / f"{patient_id}.json").write_bytes(body)
        with state_lock:
            patients[patient_id] = stored
        return {
            "patient_id": patient_id,
            "demographics": _demographics_dict(stored.catalog),
            "catalog_size": len(stored.catalog.entries),
            "kind_counts": _kind_counts(stored.catalog),
        }

    @app.get("/patients")
    def list_patients() -> list[dict[str, Any]]:
        with state_lock:
            stored_list = list(patients.values())
        return [
            {
                "patient_id": stored.patient_id,
                "demographics": _demographics_dict(stored.catalog),
                "catalog_size": len(stored.catalog.entries),
            }
            for stored in stored_list
        ]

    @app.get("/patients/{patient_id}/resources")
    def list_resources(patient_id: str) -> list[dict[str, Any]]:
        return _catalog_rows(get_patient(patient_id).catalog)

    def find_envelope(stored: StoredPatient, resource_id: str):
        for identifier, envelope in stored.catalog.entries:
            if envelope.logical_id == resource_id:
                return identifier, envelope
        raise ApiError(404, "resource_not_found", f"no resource {resource_id!r}")

    @app.get("/patients/{patient_id}/resources/{resource_id}/summary")
    def resource_summary(patient_id: str, resource_id: str, locale: str | None = None) -> dict[str, Any]:
        stored = get_patient(patient_id)
        identifier, envelope = find_envelope(stored, resource_id)
        backend = summary_backend or chat_backend
        try:
            summary = summarize_resource(
                envelope, backend, locale=locale or config.default_locale, cache=summary_cache
            )
        except BackendError as exc:
            raise ApiError(502, "backend_error", exc.message) from exc
        return {
            "rendered": identifier.rendered(),
            "summary_text": summary.summary_text,
            "word_count": summary.word_count,
            "locale": summary.locale,
            "created_at": summary.created_at,
        }

    @app.get("/patients/{patient_id}/resources/{resource_id}/interpretation")
    def resource_interpretation(
        patient_id: str, resource_id: str, locale: str | None = None
    ) -> dict[str, Any]:
        stored = get_patient(patient_id)
        identifier, envelope = find_envelope(stored, resource_id)
        backend = summary_backend or chat_backend
        try:
            interpretation = interpret_resource(
                envelope, backend, locale=locale or config.default_locale
            )
        except BackendError as exc:
            raise ApiError(502, "backend_error", exc.message) from exc
        return {
            "rendered": identifier.rendered(),
            "interpretation_text": interpretation.interpretation_text,
            "locale": interpretation.locale,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: _SessionBody) -> dict[str, Any]:
        evict_idle_sessions()
        stored = get_patient(body.patient_id)
        locale = body.locale or config.default_locale
        session_config = SessionConfig(
            backend=chat_backend,
            locale=locale,
            max_tool_iterations=config.max_tool_iterations,
            summary_backend=summary_backend,
            summary_cache=summary_cache,
        )
        handle_id = secrets.token_urlsafe(32)
        session = new_session(
            stored.bundle,
            session_config,
            config.filter_config,
            reference_date=config.reference_date,
            session_id=handle_id,
        )
        live = LiveSession(
            handle_id=handle_id,
            session=session,
            patient_label=stored.catalog.patient.display_name,
            locale=locale,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        with state_lock:
            sessions[handle_id] = live
        logger.info("session created for patient=%s", body.patient_id)
        return {
            "session_id": handle_id,
            "patient_label": live.patient_label,
            "locale": live.locale,
            "created_at": live.created_at,
        }

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: _MessageBody) -> StreamingResponse:
        live = get_session(session_id)
        if not body.text:
            raise ApiError(400, "invalid_request", "text must be non-empty")
        if not live.in_flight.acquire(blocking=False):
            raise ApiError(409, "session_busy", "a message is already in flight")

        events: queue.Queue[SessionEvent | None] = queue.Queue()
        terminal_seen = threading.Event()

        def forward(event: SessionEvent) -> None:
            if event.kind in TERMINAL_EVENT_KINDS:
                terminal_seen.set()
            events.put(event)

        def run() -> None:
            live.session.subscribers.append(forward)
            try:
                ask(live.session, body.text)
            except FhirlitError:
                # ask() already emitted the terminal error event.
                pass
            except Exception as exc:  # defensive: surface unexpected bugs as one error event
                if not terminal_seen.is_set():
                    live.session.emit(
                        "error", json.dumps({"code": "internal", "message": str(exc)})
                    )
            finally:
                live.session.subscribers.remove(forward)
                live.last_active = time.monotonic()
                events.put(None)
                live.in_flight.release()

        worker = threading.Thread(target=run, daemon=True)

        def stream() -> Iterator[str]:
            worker.start()
            while True:
                event = events.get()
                if event is None:
                    break
                yield _sse_frame(event)
                if event.kind in TERMINAL_EVENT_KINDS:
                    break

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/events")
    def replay_events(session_id: str, after: int = -1) -> list[dict[str, Any]]:
        live = get_session(session_id)
        return [
            {"kind": e.kind, "payload": e.payload, "timestamp": e.timestamp}
            for e in live.session.event_log
            if e.timestamp > after
        ]

    @app.delete("/sessions/{session_id}/context")
    def clear_context(session_id: str) -> dict[str, Any]:
        live = get_session(session_id)
        if not live.in_flight.acquire(blocking=False):
            raise ApiError(409, "session_busy", "a message is in flight")
        try:
            clear(live.session)
        finally:
            live.in_flight.release()
        return {"cleared": True, "messages": len(live.session.messages)}

    return app


def load_service_config(data_dir: str | Path, config_path: str | Path | None = None) -> ServiceConfig:
    """Load service settings; a ``service`` section overrides top-level keys,
    so one file can carry filter/backend settings shared with the CLI."""
    data_dir = Path(data_dir)
    if config_path:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        merged = {**raw, **raw.get("service", {})}
        return ServiceConfig.from_dict(merged, data_dir)
    return ServiceConfig(data_dir=data_dir)
