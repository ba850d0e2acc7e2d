"""Pre-filtering and the identifier-triplet catalog.

Medication requests are narrowed to active outpatient prescriptions;
observation-like resources are reduced to the most recent occurrence per
primary code. What survives becomes the catalog of (type, display name,
date) triplets the chat loop exposes to the model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from .fhir_model import (
    CONDITION,
    DIAGNOSTIC_REPORT,
    MEDICATION_REQUEST,
    OBSERVATION,
    PATIENT,
    Bundle,
    PatientSummary,
    ResourceEnvelope,
    ResourceKind,
    patient_demographics,
)

_EPOCH_MIN = datetime.min.replace(tzinfo=timezone.utc)

# Emission order of kind groups in a catalog. Kinds not listed follow in
# order of first appearance in the bundle.
_KIND_ORDER = [
    "MedicationRequest",
    "AllergyIntolerance",
    "Condition",
    "Observation",
    "DiagnosticReport",
    "Procedure",
    "Immunization",
    "Encounter",
    "CarePlan",
]


@dataclass(frozen=True)
class ResourceIdentifier:
    """The triplet naming one catalog entry: type, display name, date."""

    kind: ResourceKind
    display_name: str
    date: datetime | None = None

    def rendered(self) -> str:
        when = self.date.date().isoformat() if self.date else "unknown"
        return f"{self.kind.name} | {self.display_name} | {when}"


@dataclass
class FilterConfig:
    """Pre-filtering rules applied before the catalog is built."""

    medication_statuses_kept: set[str] = field(default_factory=lambda: {"active"})
    medication_categories_kept: set[str] = field(default_factory=lambda: {"outpatient"})
    latest_only_kinds: set[ResourceKind] = field(
        default_factory=lambda: {OBSERVATION, CONDITION, DIAGNOSTIC_REPORT}
    )
    max_catalog_entries: int = 128
    condition_code_denylist: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.max_catalog_entries < 1:
            raise ValueError("max_catalog_entries must be >= 1")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FilterConfig":
        """Build from the documented configuration keys (all optional)."""
        kwargs: dict[str, Any] = {}
        if "medication_statuses_kept" in data:
            kwargs["medication_statuses_kept"] = set(data["medication_statuses_kept"])
        if "medication_categories_kept" in data:
            kwargs["medication_categories_kept"] = set(data["medication_categories_kept"])
        if "latest_only_kinds" in data:
            kwargs["latest_only_kinds"] = {ResourceKind(name) for name in data["latest_only_kinds"]}
        if "max_catalog_entries" in data:
            kwargs["max_catalog_entries"] = int(data["max_catalog_entries"])
        if "condition_code_denylist" in data:
            kwargs["condition_code_denylist"] = set(data["condition_code_denylist"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "FilterConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Catalog:
    """Filtered, deduplicated identifier triplets plus their envelopes."""

    entries: list[tuple[ResourceIdentifier, ResourceEnvelope]]
    patient: PatientSummary

    def rendered_names(self) -> list[str]:
        return [identifier.rendered() for identifier, _ in self.entries]

    def kinds_present(self) -> list[str]:
        seen: list[str] = []
        for identifier, _ in self.entries:
            if identifier.kind.name not in seen:
                seen.append(identifier.kind.name)
        return seen


def compute_identifier(envelope: ResourceEnvelope) -> ResourceIdentifier:
    """The identifier triplet for one envelope; total over any envelope.

    Display name prefers the resource's own text, then the first coding
    display, then ``"{kind} {logical_id}"``. The date is the envelope's
    best-describing date (observation effective date, medication authored-on,
    condition onset, procedure start, immunization occurrence).
    """
    name = envelope.display_text
    if not name and envelope.primary_code and envelope.primary_code.display:
        name = envelope.primary_code.display
    if not name:
        name = f"{envelope.kind.name} {envelope.logical_id}"
    return ResourceIdentifier(kind=envelope.kind, display_name=name, date=envelope.effective_date)


def filter_medications(
    envelopes: Iterable[ResourceEnvelope], config: FilterConfig | None = None
) -> list[ResourceEnvelope]:
    """Keep medication requests whose status and category both qualify.

    A request survives when its status is in ``medication_statuses_kept``
    and at least one of its category codes is in
    ``medication_categories_kept``. Input order is preserved.
    """
    config = config or FilterConfig()
    kept = []
    for envelope in envelopes:
        if envelope.status not in config.medication_statuses_kept:
            continue
        if not any(c.code in config.medication_categories_kept for c in envelope.category_codes):
            continue
        kept.append(envelope)
    return kept


def _group_key(envelope: ResourceEnvelope) -> str:
    if envelope.primary_code and envelope.primary_code.code:
        return envelope.primary_code.code
    return compute_identifier(envelope).display_name


def _date_key(envelope: ResourceEnvelope) -> datetime:
    return envelope.effective_date or _EPOCH_MIN


def latest_per_code(envelopes: Iterable[ResourceEnvelope]) -> list[ResourceEnvelope]:
    """Reduce to the most recent envelope per primary code.

    Groups by ``primary_code.code`` (falling back to the display name),
    keeps the maximum-dated envelope of each group (ties resolved toward the
    later document position), and orders the result by date descending.
    """
    best: dict[str, tuple[datetime, int, ResourceEnvelope]] = {}
    for index, envelope in enumerate(envelopes):
        key = _group_key(envelope)
        candidate = (_date_key(envelope), index, envelope)
        if key not in best or candidate[:2] > best[key][:2]:
            best[key] = candidate
    winners = sorted(best.values(), key=lambda item: (item[0], -item[1]), reverse=True)
    return [envelope for _, _, envelope in winners]


def _deduplicate(
    entries: list[tuple[ResourceIdentifier, ResourceEnvelope]],
) -> list[tuple[ResourceIdentifier, ResourceEnvelope]]:
    """Disambiguate identical triplets by suffixing ' #2', ' #3', ... in order."""
    counts: dict[str, int] = {}
    result = []
    for identifier, envelope in entries:
        base = identifier.rendered()
        seen = counts.get(base, 0) + 1
        counts[base] = seen
        if seen > 1:
            identifier = replace(identifier, display_name=f"{identifier.display_name} #{seen}")
        result.append((identifier, envelope))
    return result


def build_catalog(
    bundle: Bundle,
    config: FilterConfig | None = None,
    reference_date: date | None = None,
) -> Catalog:
    """Build the catalog the chat loop selects resources from.

    Medication requests pass through ``filter_medications``; kinds in
    ``latest_only_kinds`` pass through ``latest_per_code``; everything else
    except the Patient resource (injected separately into the chat prefix)
    passes through unfiltered. Entries are grouped by kind, deduplicated, and
    truncated oldest-first down to ``max_catalog_entries``.
    """
    config = config or FilterConfig()
    reference_date = reference_date or date.today()
    patient = patient_demographics(bundle, reference_date)

    groups: dict[str, list[ResourceEnvelope]] = {}
    for envelope in bundle.entries:
        if envelope.kind == PATIENT:
            continue
        groups.setdefault(envelope.kind.name, []).append(envelope)

    if config.condition_code_denylist and CONDITION.name in groups:
        groups[CONDITION.name] = [
            e
            for e in groups[CONDITION.name]
            if not (e.primary_code and e.primary_code.code in config.condition_code_denylist)
        ]

    ordered_kinds = [k for k in _KIND_ORDER if k in groups]
    ordered_kinds += [k for k in groups if k not in _KIND_ORDER]

    survivors: list[ResourceEnvelope] = []
    for kind_name in ordered_kinds:
        members = groups[kind_name]
        if kind_name == MEDICATION_REQUEST.name:
            members = filter_medications(members, config)
        elif ResourceKind(kind_name) in config.latest_only_kinds:
            members = latest_per_code(members)
        survivors.extend(members)

    if len(survivors) > config.max_catalog_entries:
        excess = len(survivors) - config.max_catalog_entries
        by_age = sorted(range(len(survivors)), key=lambda i: (_date_key(survivors[i]), -i))
        dropped = set(by_age[:excess])
        survivors = [e for i, e in enumerate(survivors) if i not in dropped]

    entries = _deduplicate([(compute_identifier(e), e) for e in survivors])
    return Catalog(entries=entries, patient=patient)
