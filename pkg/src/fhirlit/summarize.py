"""Per-resource summaries and interpretations.

Summaries are the compact (< 100 words) texts fed back into the chat context
as tool-call results; interpretations are the longer-form explanations shown
in the resource detail view. Both prompts embed the resource's raw FHIR JSON,
since that is what the model is asked to explain.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .backend import Backend, assistant, system, user
from .errors import MalformedReplyError
from .fhir_model import ResourceEnvelope, ResourceKind
from .pipeline import ResourceIdentifier, compute_identifier

WORD_CAP = 100

_LANGUAGE_NAMES = {
    "en": "English",
    "es": "Spanish",
    "zh": "Chinese",
    "de": "German",
    "fr": "French",
}

_SUMMARY_SYSTEM = (
    "You are a careful medical records assistant. Summarize the health record "
    "the user provides in fewer than {cap} words of plain, patient-friendly "
    "language. State what the record is, what it says, and when. {language_line}"
)

_COMPRESS_PROMPT = (
    "That summary is too long. Rewrite it in fewer than {cap} words, keeping "
    "only the most important facts."
)

_INTERPRET_SYSTEM = (
    "You are a careful medical records assistant. Explain the health record "
    "the user provides in detail for a patient with no medical training: what "
    "it is, what the values or entries mean, and what questions the patient "
    "might ask their care team about it. {language_line}"
)


def language_line(locale: str) -> str:
    """Instruction sentence asking for answers in the locale's language."""
    primary = locale.split("-")[0].lower() if locale else "en"
    name = _LANGUAGE_NAMES.get(primary)
    if name:
        return f"Respond in {name} (user locale: {locale})."
    return f"Respond in the language of the user's locale: {locale}."


def word_count(text: str) -> int:
    """Number of whitespace-separated tokens (Unicode whitespace)."""
    return len(text.split())


def _truncate_to_cap(text: str) -> str:
    words = text.split()
    if len(words) <= WORD_CAP:
        return text
    clipped = words[:WORD_CAP]
    clipped[-1] += "…"
    return " ".join(clipped)


@dataclass(frozen=True)
class ResourceSummary:
    identifier: ResourceIdentifier
    summary_text: str
    locale: str
    created_at: str
    word_count: int


@dataclass(frozen=True)
class ResourceInterpretation:
    identifier: ResourceIdentifier
    interpretation_text: str
    locale: str


def payload_hash(raw: dict) -> str:
    """Content hash of a raw resource payload (key order independent)."""
    canonical = json.dumps(raw, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class SummaryCache:
    """Summary store keyed by (logical id, payload hash, locale).

    A hit therefore implies the envelope payload is byte-identical to the
    cached one. Optionally persisted as an append-only NDJSON file; duplicate
    concurrent misses may both compute (last write wins).
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._entries: dict[tuple[str, str, str], ResourceSummary] = {}
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            self._load()

    def _load(self) -> None:
        for line in self._path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            key = (record["logical_id"], record["payload_hash"], record["locale"])
            self._entries[key] = ResourceSummary(
                identifier=ResourceIdentifier(
                    kind=ResourceKind(record["kind"]),
                    display_name=record["display_name"],
                    date=None,
                ),
                summary_text=record["summary_text"],
                locale=record["locale"],
                created_at=record["created_at"],
                word_count=record["word_count"],
            )

    @staticmethod
    def key_for(envelope: ResourceEnvelope, locale: str) -> tuple[str, str, str]:
        return (envelope.logical_id, payload_hash(envelope.raw), locale)

    def get(self, envelope: ResourceEnvelope, locale: str) -> ResourceSummary | None:
        with self._lock:
            return self._entries.get(self.key_for(envelope, locale))

    def put(self, envelope: ResourceEnvelope, locale: str, summary: ResourceSummary) -> None:
        key = self.key_for(envelope, locale)
        with self._lock:
            self._entries[key] = summary
            if self._path:
                record = {
                    "logical_id": key[0],
                    "payload_hash": key[1],
                    "locale": key[2],
                    "kind": summary.identifier.kind.name,
                    "display_name": summary.identifier.display_name,
                    "summary_text": summary.summary_text,
                    "created_at": summary.created_at,
                    "word_count": summary.word_count,
                }
                with self._path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


def _resource_json(envelope: ResourceEnvelope) -> str:
    return json.dumps(envelope.raw, indent=2, ensure_ascii=False)


def _reply_text(backend: Backend, messages) -> str:
    result = backend.complete(messages)
    if result.is_tool_calls:
        raise MalformedReplyError("expected text, backend returned tool calls")
    text = (result.text or "").strip()
    if not text:
        raise MalformedReplyError("backend returned an empty reply")
    return text


def summarize_resource(
    envelope: ResourceEnvelope,
    backend: Backend,
    locale: str = "en-US",
    cache: SummaryCache | None = None,
) -> ResourceSummary:
    """Summarize one resource in fewer than 100 words.

    Cache hits return without a backend call. On a miss the backend is asked
    once; replies over the cap get one compression re-prompt, then a hard
    truncation at word 100 with an ellipsis marker, so the cap always holds.
    """
    if cache is not None:
        hit = cache.get(envelope, locale)
        if hit is not None:
            return hit

    prompt = system(
        _SUMMARY_SYSTEM.format(cap=WORD_CAP, language_line=language_line(locale))
    )
    request = user(f"Summarize this FHIR resource:\n{_resource_json(envelope)}")
    text = _reply_text(backend, [prompt, request])

    if word_count(text) > WORD_CAP:
        retry = [prompt, request, assistant(text), user(_COMPRESS_PROMPT.format(cap=WORD_CAP))]
        text = _reply_text(backend, retry)
    text = _truncate_to_cap(text)

    summary = ResourceSummary(
        identifier=compute_identifier(envelope),
        summary_text=text,
        locale=locale,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        word_count=word_count(text),
    )
    if cache is not None:
        cache.put(envelope, locale, summary)
    return summary


def interpret_resource(
    envelope: ResourceEnvelope,
    backend: Backend,
    locale: str = "en-US",
) -> ResourceInterpretation:
    """Longer-form interpretation of one resource; no word cap, no caching."""
    prompt = system(_INTERPRET_SYSTEM.format(language_line=language_line(locale)))
    request = user(f"Explain this FHIR resource:\n{_resource_json(envelope)}")
    text = _reply_text(backend, [prompt, request])
    return ResourceInterpretation(
        identifier=compute_identifier(envelope),
        interpretation_text=text,
        locale=locale,
    )
