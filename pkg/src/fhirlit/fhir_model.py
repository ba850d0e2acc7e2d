"""FHIR R4 bundle parsing into typed resource envelopes.

Only the fields the downstream pipeline needs are projected into typed
attributes (code, status, category, dates, display text); everything else
stays in the retained raw payload. Parsing is total over well-formed JSON:
entries that cannot be projected degrade to an ``Other`` kind with their raw
payload preserved, never dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Any, ClassVar

from .errors import MalformedDocumentError, MultiplePatientsError, NoPatientError

_KNOWN_KIND_NAMES = frozenset(
    {
        "Patient",
        "MedicationRequest",
        "Observation",
        "Condition",
        "AllergyIntolerance",
        "Procedure",
        "Immunization",
        "DiagnosticReport",
        "Encounter",
        "CarePlan",
    }
)


@dataclass(frozen=True)
class ResourceKind:
    """A FHIR resource type.

    Known clinical types compare equal to the module-level constants below;
    any other ``resourceType`` string is retained verbatim as an "other"
    kind so unknown resources are never dropped.
    """

    name: str

    KNOWN: ClassVar[frozenset[str]] = _KNOWN_KIND_NAMES

    @classmethod
    def of(cls, resource_type: str) -> "ResourceKind":
        return cls(resource_type)

    @property
    def is_known(self) -> bool:
        return self.name in self.KNOWN

    def __str__(self) -> str:
        return self.name


PATIENT = ResourceKind("Patient")
MEDICATION_REQUEST = ResourceKind("MedicationRequest")
OBSERVATION = ResourceKind("Observation")
CONDITION = ResourceKind("Condition")
ALLERGY_INTOLERANCE = ResourceKind("AllergyIntolerance")
PROCEDURE = ResourceKind("Procedure")
IMMUNIZATION = ResourceKind("Immunization")
DIAGNOSTIC_REPORT = ResourceKind("DiagnosticReport")
ENCOUNTER = ResourceKind("Encounter")
CARE_PLAN = ResourceKind("CarePlan")
OTHER = ResourceKind("Other")


@dataclass(frozen=True)
class CodedValue:
    """Projection of one FHIR Coding: system URI, code, optional display."""

    system: str
    code: str
    display: str | None = None


@dataclass
class ResourceEnvelope:
    """One bundle entry: typed core fields plus the retained raw payload."""

    kind: ResourceKind
    logical_id: str
    raw: dict[str, Any]
    primary_code: CodedValue | None = None
    display_text: str | None = None
    status: str | None = None
    category_codes: list[CodedValue] = field(default_factory=list)
    effective_date: datetime | None = None


@dataclass
class Bundle:
    """Ordered resource envelopes parsed from one FHIR bundle document."""

    entries: list[ResourceEnvelope]
    source_label: str

    def by_kind(self, kind: ResourceKind) -> list[ResourceEnvelope]:
        return [e for e in self.entries if e.kind == kind]


@dataclass(frozen=True)
class PatientSummary:
    """Demographics extracted from the bundle's single Patient resource."""

    family_name: str
    given_names: tuple[str, ...]
    birth_date: date | None
    administrative_gender: str
    age_years: int
    allergies_count: int

    @property
    def display_name(self) -> str:
        return " ".join([*self.given_names, self.family_name]).strip()


def parse_fhir_datetime(value: str | None) -> datetime | None:
    """Parse a FHIR date or dateTime of any declared precision.

    Accepts ``YYYY``, ``YYYY-MM``, ``YYYY-MM-DD``, and full timestamps.
    Partial dates normalize to the earliest instant of their period, and all
    results carry UTC so mixed-precision values order totally.
    """
    if not value or not isinstance(value, str):
        return None
    text = value.strip()
    try:
        if len(text) == 4 and text.isdigit():
            return datetime(int(text), 1, 1, tzinfo=timezone.utc)
        if len(text) == 7 and text[4] == "-":
            return datetime(int(text[:4]), int(text[5:7]), 1, tzinfo=timezone.utc)
        if len(text) == 10:
            parsed = date.fromisoformat(text)
            return datetime(parsed.year, parsed.month, parsed.day, tzinfo=timezone.utc)
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=timezone.utc)
        return stamp.astimezone(timezone.utc)
    except ValueError:
        return None


def parse_fhir_date(value: str | None) -> date | None:
    """Parse a FHIR date to a calendar date (partials floor to period start)."""
    stamp = parse_fhir_datetime(value)
    return stamp.date() if stamp else None


def _first_coding(concept: Any) -> CodedValue | None:
    """First coding of a CodeableConcept with a non-empty code."""
    if not isinstance(concept, dict):
        return None
    for coding in concept.get("coding") or []:
        if isinstance(coding, dict) and coding.get("code"):
            return CodedValue(
                system=str(coding.get("system", "")),
                code=str(coding["code"]),
                display=coding.get("display"),
            )
    return None


def _concept_text(concept: Any) -> str | None:
    if isinstance(concept, dict) and concept.get("text"):
        return str(concept["text"])
    return None


def _all_codings(concepts: Any) -> list[CodedValue]:
    values: list[CodedValue] = []
    for concept in concepts or []:
        if not isinstance(concept, dict):
            continue
        for coding in concept.get("coding") or []:
            if isinstance(coding, dict) and coding.get("code"):
                values.append(
                    CodedValue(
                        system=str(coding.get("system", "")),
                        code=str(coding["code"]),
                        display=coding.get("display"),
                    )
                )
    return values


# Which CodeableConcept names a resource, per resource type.
_CODE_FIELDS = {
    "MedicationRequest": "medicationCodeableConcept",
    "Observation": "code",
    "Condition": "code",
    "AllergyIntolerance": "code",
    "Procedure": "code",
    "DiagnosticReport": "code",
    "Immunization": "vaccineCode",
    "CarePlan": None,
    "Encounter": None,
    "Patient": None,
}


def _extract_effective_date(kind: ResourceKind, raw: dict[str, Any]) -> datetime | None:
    """The date that best describes a resource, per its type."""
    name = kind.name
    if name == "Observation" or name == "DiagnosticReport":
        return (
            parse_fhir_datetime(raw.get("effectiveDateTime"))
            or parse_fhir_datetime((raw.get("effectivePeriod") or {}).get("start"))
            or parse_fhir_datetime(raw.get("issued"))
        )
    if name == "MedicationRequest":
        return parse_fhir_datetime(raw.get("authoredOn"))
    if name == "Condition":
        return parse_fhir_datetime(raw.get("onsetDateTime"))
    if name == "Procedure":
        return parse_fhir_datetime(raw.get("performedDateTime")) or parse_fhir_datetime(
            (raw.get("performedPeriod") or {}).get("start")
        )
    if name == "Immunization":
        return parse_fhir_datetime(raw.get("occurrenceDateTime"))
    if name == "AllergyIntolerance":
        return parse_fhir_datetime(raw.get("recordedDate"))
    if name == "Encounter" or name == "CarePlan":
        return parse_fhir_datetime((raw.get("period") or {}).get("start"))
    if name == "Patient":
        return parse_fhir_datetime(raw.get("birthDate"))
    return None


def _extract_status(raw: dict[str, Any]) -> str | None:
    status = raw.get("status")
    if isinstance(status, str) and status:
        return status
    clinical = _first_coding(raw.get("clinicalStatus"))
    return clinical.code if clinical else None


def parse_envelope(raw: Any, fallback_id: str) -> ResourceEnvelope:
    """Project one entry's resource into an envelope; total over any JSON value."""
    if not isinstance(raw, dict):
        raw = {"value": raw}
    resource_type = raw.get("resourceType")
    kind = ResourceKind(resource_type) if isinstance(resource_type, str) and resource_type else OTHER
    logical_id = raw.get("id") if isinstance(raw.get("id"), str) and raw.get("id") else fallback_id

    concept_field = _CODE_FIELDS.get(kind.name, "code")
    concept = raw.get(concept_field) if concept_field else None
    display_text = _concept_text(concept)
    primary_code = _first_coding(concept)
    if kind == ENCOUNTER:
        types = raw.get("type") or []
        display_text = _concept_text(types[0]) if types else None
        primary_code = _first_coding(types[0]) if types else None
    elif kind == CARE_PLAN:
        categories = raw.get("category") or []
        display_text = _concept_text(categories[0]) if categories else None
        primary_code = _first_coding(categories[0]) if categories else None

    return ResourceEnvelope(
        kind=kind,
        logical_id=logical_id,
        raw=raw,
        primary_code=primary_code,
        display_text=display_text,
        status=_extract_status(raw),
        category_codes=_all_codings(raw.get("category")),
        effective_date=_extract_effective_date(kind, raw),
    )


def parse_bundle(data: bytes | str, source_label: str = "") -> Bundle:
    """Parse a FHIR R4 JSON bundle document into ordered envelopes.

    A document with an ``entry`` array yields one envelope per entry in
    document order; a bare single resource yields a one-entry bundle.
    Per-entry projection failures degrade that entry to kind ``Other`` with
    its raw payload preserved.

    Raises:
        MalformedDocumentError: input is not JSON, or is JSON with neither
            an entry array nor a resourceType.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocumentError(f"not UTF-8: {exc}") from exc
    try:
        document = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"not JSON: {exc}") from exc

    if not isinstance(document, dict):
        raise MalformedDocumentError("top-level JSON value is not an object")

    entry = document.get("entry")
    if isinstance(entry, list):
        envelopes = []
        for index, item in enumerate(entry):
            resource = item.get("resource") if isinstance(item, dict) else item
            envelopes.append(parse_envelope(resource, fallback_id=f"entry-{index}"))
        return Bundle(entries=envelopes, source_label=source_label)

    resource_type = document.get("resourceType")
    if resource_type == "Bundle":
        # Bundle resource without an entry array: legal FHIR, zero entries.
        return Bundle(entries=[], source_label=source_label)
    if isinstance(resource_type, str) and resource_type:
        return Bundle(entries=[parse_envelope(document, fallback_id="entry-0")], source_label=source_label)
    raise MalformedDocumentError("no entry array and not a single resource")


def _whole_years_between(birth: date, reference: date) -> int:
    years = reference.year - birth.year
    if (reference.month, reference.day) < (birth.month, birth.day):
        years -= 1
    return max(years, 0)


def patient_demographics(bundle: Bundle, reference_date: date) -> PatientSummary:
    """Extract the bundle's patient demographics.

    Age is computed in whole years against ``reference_date``;
    ``allergies_count`` counts the bundle's AllergyIntolerance envelopes.

    Raises:
        NoPatientError / MultiplePatientsError: ambiguous subject.
    """
    patients = bundle.by_kind(PATIENT)
    if not patients:
        raise NoPatientError(f"no Patient resource in bundle {bundle.source_label!r}")
    if len(patients) > 1:
        raise MultiplePatientsError(
            f"{len(patients)} Patient resources in bundle {bundle.source_label!r}"
        )
    raw = patients[0].raw

    family = ""
    given: tuple[str, ...] = ()
    names = raw.get("name") or []
    if names:
        official = next((n for n in names if isinstance(n, dict) and n.get("use") == "official"), None)
        name = official or next((n for n in names if isinstance(n, dict)), {})
        family = str(name.get("family", "") or "")
        given = tuple(str(part) for part in name.get("given") or [])

    birth = parse_fhir_date(raw.get("birthDate"))
    age = _whole_years_between(birth, reference_date) if birth else 0

    return PatientSummary(
        family_name=family,
        given_names=given,
        birth_date=birth,
        administrative_gender=str(raw.get("gender", "") or "unknown"),
        age_years=age,
        allergies_count=len(bundle.by_kind(ALLERGY_INTOLERANCE)),
    )


def is_deceased(patient: ResourceEnvelope) -> bool:
    """True when the Patient resource marks the person as deceased."""
    raw = patient.raw
    return bool(raw.get("deceasedBoolean")) or bool(raw.get("deceasedDateTime"))
