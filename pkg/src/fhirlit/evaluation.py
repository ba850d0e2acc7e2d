"""Scripted evaluation protocol: run plans, scoring, and variability analytics.

A run plan drives the seven standard patient questions against each patient
bundle for a number of repetitions, one fresh cleared session per run, and
records one NDJSON transcript per (patient, repetition). Likert scoring stays
a human activity; this module supplies the score-sheet format, the mean/std
aggregation, the repeated-answer variability report, and the cohort selector.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from .backend import Backend, backend_from_spec
from .chat import SessionConfig, SessionEvent, ask, clear, new_session, serialize_events
from .errors import (
    BackendError,
    EmptyInputError,
    InfeasibleError,
    NoGroundTruthError,
)
from .fhir_model import (
    ALLERGY_INTOLERANCE,
    CONDITION,
    PATIENT,
    PROCEDURE,
    Bundle,
    is_deceased,
    parse_bundle,
    patient_demographics,
)
from .pipeline import FilterConfig, build_catalog, compute_identifier

DIMENSIONS = ("accuracy", "relevance", "understandability")

DEFAULT_QUESTIONS: tuple[tuple[str, str], ...] = (
    ("Q1", "What are my current medications and how should I be taking them?"),
    ("Q2", "What are the most common side effects for each medication I am taking?"),
    ("Q3", "Am I allergic to any of my medications?"),
    ("Q4", "Can you summarize my current medical conditions?"),
    (
        "Q5",
        "What are the health behaviors I should be incorporating into my daily "
        "routine to help with my conditions?",
    ),
    ("Q6", "Can you summarize my current medical conditions in German?"),
    (
        "Q7",
        "What are my recent laboratory values, what do they mean, and how can I "
        "improve them?",
    ),
)


@dataclass(frozen=True)
class Question:
    id: str
    text: str


@dataclass(frozen=True)
class QuestionSet:
    """The ordered question script; defaults to the standard seven."""

    questions: tuple[Question, ...] = tuple(Question(i, t) for i, t in DEFAULT_QUESTIONS)

    def __post_init__(self) -> None:
        ids = [q.id for q in self.questions]
        if len(ids) != len(set(ids)):
            raise ValueError("question ids must be unique")

    def index_of(self, question_id: str) -> int:
        for index, question in enumerate(self.questions):
            if question.id == question_id:
                return index
        raise KeyError(question_id)

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self):
        return iter(self.questions)


@dataclass
class RunPlan:
    """The full run matrix: patients x questions x repetitions."""

    patients: list[Path]
    repetitions: int
    questions: QuestionSet = field(default_factory=QuestionSet)
    locale: str = "en-US"
    chat_backend_spec: dict[str, Any] = field(default_factory=lambda: {"type": "mock"})
    summary_backend_spec: dict[str, Any] | None = None
    filter_config: FilterConfig = field(default_factory=FilterConfig)
    reference_date: date | None = None
    max_tool_iterations: int = 10
    workers: int = 1

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @property
    def total_runs(self) -> int:
        return len(self.patients) * self.repetitions

    def to_dict(self) -> dict[str, Any]:
        return {
            "patients": [str(p) for p in self.patients],
            "repetitions": self.repetitions,
            "questions": [{"id": q.id, "text": q.text} for q in self.questions],
            "locale": self.locale,
            "chat_backend": self.chat_backend_spec,
            "summary_backend": self.summary_backend_spec,
            "reference_date": self.reference_date.isoformat() if self.reference_date else None,
            "max_tool_iterations": self.max_tool_iterations,
            "workers": self.workers,
        }

    def plan_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> "RunPlan":
        base = base_dir or Path(".")
        questions = QuestionSet()
        if data.get("questions"):
            questions = QuestionSet(
                tuple(Question(q["id"], q["text"]) for q in data["questions"])
            )
        reference = data.get("reference_date")
        return cls(
            patients=[(base / p).resolve() if not Path(p).is_absolute() else Path(p) for p in data["patients"]],
            repetitions=int(data.get("repetitions", 1)),
            questions=questions,
            locale=data.get("locale", "en-US"),
            chat_backend_spec=data.get("chat_backend", {"type": "mock"}),
            summary_backend_spec=data.get("summary_backend"),
            filter_config=FilterConfig.from_dict(data.get("filter", {})),
            reference_date=date.fromisoformat(reference) if reference else None,
            max_tool_iterations=int(data.get("max_tool_iterations", 10)),
            workers=int(data.get("workers", 1)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RunPlan":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)


def _write_atomic(path: Path, content: str) -> None:
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=path.parent, suffix=".tmp", delete=False
    )
    try:
        handle.write(content)
        handle.close()
        os.replace(handle.name, path)
    except BaseException:
        handle.close()
        os.unlink(handle.name)
        raise


def _run_one(
    plan: RunPlan, bundle: Bundle, patient_stem: str, repetition: int, output_dir: Path
) -> tuple[Path, bool]:
    """One (patient, repetition) run; returns (transcript path, failed?)."""
    chat_backend: Backend = backend_from_spec(plan.chat_backend_spec)
    summary_backend = (
        backend_from_spec(plan.summary_backend_spec) if plan.summary_backend_spec else None
    )
    config = SessionConfig(
        backend=chat_backend,
        locale=plan.locale,
        max_tool_iterations=plan.max_tool_iterations,
        summary_backend=summary_backend,
    )
    session = new_session(
        bundle,
        config,
        plan.filter_config,
        reference_date=plan.reference_date,
        session_id=f"{patient_stem}_{repetition}",
    )
    clear(session)
    failed = False
    for question in plan.questions:
        try:
            ask(session, question.text)
        except BackendError:
            failed = True  # error event already recorded in the transcript
            break
    path = output_dir / f"{patient_stem}_{repetition}.ndjson"
    _write_atomic(path, serialize_events(session.event_log))
    return path, failed


def run_plan(plan: RunPlan, output_dir: str | Path) -> list[Path]:
    """Execute every run in the plan and persist one transcript per run.

    Questions are asked strictly in order within a fresh, cleared session.
    Backend failures abort the affected run only; the plan completes the
    rest. Run metadata (plan hash, backend config, wall-clock timestamps,
    failure count) lands in ``run_metadata.json`` next to the transcripts.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")

    bundles = {
        path: parse_bundle(path.read_bytes(), source_label=path.stem) for path in plan.patients
    }
    jobs = [
        (path, repetition)
        for path in plan.patients
        for repetition in range(1, plan.repetitions + 1)
    ]

    results: list[tuple[Path, bool]] = []
    if plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            futures = [
                pool.submit(_run_one, plan, bundles[path], path.stem, rep, output_dir)
                for path, rep in jobs
            ]
            results = [f.result() for f in futures]
    else:
        results = [_run_one(plan, bundles[path], path.stem, rep, output_dir) for path, rep in jobs]

    transcripts = [path for path, _ in results]
    failures = sum(1 for _, failed in results if failed)
    metadata = {
        "plan_hash": plan.plan_hash(),
        "chat_backend": plan.chat_backend_spec,
        "summary_backend": plan.summary_backend_spec,
        "started_at": started_at,
        "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "runs": len(results),
        "failed_runs": failures,
        "transcripts": [p.name for p in transcripts],
    }
    _write_atomic(output_dir / "run_metadata.json", json.dumps(metadata, indent=2) + "\n")
    return transcripts


def load_transcript(path: str | Path) -> list[SessionEvent]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        events.append(
            SessionEvent(kind=record["kind"], payload=record["payload"], timestamp=record["timestamp"])
        )
    return events


def answered_questions(events: Iterable[SessionEvent]) -> list[tuple[str, str]]:
    """Pair each user question with the assistant reply that answered it."""
    pairs = []
    pending: str | None = None
    for event in events:
        if event.kind == "user_message":
            pending = event.payload
        elif event.kind == "assistant_done" and pending is not None:
            pairs.append((pending, event.payload))
            pending = None
    return pairs


# ---------------------------------------------------------------------------
# Likert score sheets and aggregation
# ---------------------------------------------------------------------------


@dataclass
class ScoreSheet:
    """One reviewer's 1..5 scores for every question of one transcript."""

    transcript: str
    reviewer: str
    scores: dict[str, dict[str, int]]  # question id -> dimension -> score

    def __post_init__(self) -> None:
        for question_id, by_dimension in self.scores.items():
            for dimension, value in by_dimension.items():
                if dimension not in DIMENSIONS:
                    raise ValueError(f"unknown dimension {dimension!r} in {question_id}")
                if not 1 <= int(value) <= 5:
                    raise ValueError(f"score {value} for {question_id}/{dimension} outside 1..5")

    def to_dict(self) -> dict[str, Any]:
        return {"transcript": self.transcript, "reviewer": self.reviewer, "scores": self.scores}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScoreSheet":
        return cls(
            transcript=data["transcript"],
            reviewer=data.get("reviewer", ""),
            scores={q: {d: int(v) for d, v in dims.items()} for q, dims in data["scores"].items()},
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ScoreSheet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class CellStats:
    mean: float
    std_dev: float
    n: int


@dataclass
class AggregateStats:
    """Mean and standard deviation per (question, dimension)."""

    cells: dict[tuple[str, str], CellStats]
    population: bool = True

    def to_dict(self) -> dict[str, Any]:
        nested: dict[str, dict[str, dict[str, float | int]]] = {}
        for (question_id, dimension), cell in sorted(self.cells.items()):
            nested.setdefault(question_id, {})[dimension] = {
                "mean": cell.mean,
                "std_dev": cell.std_dev,
                "n": cell.n,
            }
        return {"population_std": self.population, "per_question": nested}

    def to_rows(self) -> list[tuple[str, str, float, float, int]]:
        """Plot-ready tabular form: (question, dimension, mean, std, n)."""
        return [
            (question_id, dimension, cell.mean, cell.std_dev, cell.n)
            for (question_id, dimension), cell in sorted(self.cells.items())
        ]


def aggregate_scores(sheets: Iterable[ScoreSheet], population: bool = True) -> AggregateStats:
    """Aggregate score sheets into per-(question, dimension) mean and std.

    Standard deviation is population std by default (``population=False``
    switches to the sample estimator).
    """
    samples: dict[tuple[str, str], list[int]] = {}
    for sheet in sheets:
        for question_id, by_dimension in sheet.scores.items():
            for dimension, value in by_dimension.items():
                samples.setdefault((question_id, dimension), []).append(int(value))
    if not samples:
        raise EmptyInputError("no scores to aggregate")

    cells = {}
    for key, values in samples.items():
        n = len(values)
        mean = sum(values) / n
        divisor = n if population else max(n - 1, 1)
        variance = sum((v - mean) ** 2 for v in values) / divisor
        cells[key] = CellStats(mean=mean, std_dev=math.sqrt(variance), n=n)
    return AggregateStats(cells=cells, population=population)


# ---------------------------------------------------------------------------
# Variability and omission analytics
# ---------------------------------------------------------------------------


@dataclass
class VariabilityReport:
    question_id: str
    total_responses: int
    distinct_responses: int
    pairwise_exact_matches: int
    per_response_omissions: list[float]
    aggregate_omission_rate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "total_responses": self.total_responses,
            "distinct_responses": self.distinct_responses,
            "pairwise_exact_matches": self.pairwise_exact_matches,
            "per_response_omissions": self.per_response_omissions,
            "aggregate_omission_rate": self.aggregate_omission_rate,
        }


def _normalize_response(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip())


def variability_analysis(
    transcripts: Iterable[list[SessionEvent]],
    question_id: str,
    ground_truth_terms: list[str],
    questions: QuestionSet | None = None,
) -> VariabilityReport:
    """Compare repeated answers to one question across transcripts.

    Exact matching happens on whitespace-normalized text. A response's
    omission fraction is the share of ground-truth terms it does not mention
    (case-insensitive substring); the aggregate rate is the fraction of
    responses missing at least one term.
    """
    if not ground_truth_terms:
        raise NoGroundTruthError("ground-truth term list is empty")
    questions = questions or QuestionSet()
    index = questions.index_of(question_id)

    responses = []
    for events in transcripts:
        pairs = answered_questions(events)
        if index < len(pairs):
            responses.append(pairs[index][1])
    if len(responses) < 2:
        raise ValueError(f"need at least 2 responses for {question_id}, found {len(responses)}")

    normalized = [_normalize_response(r) for r in responses]
    counts: dict[str, int] = {}
    for text in normalized:
        counts[text] = counts.get(text, 0) + 1
    pairwise = sum(k * (k - 1) // 2 for k in counts.values())

    omissions = []
    for text in normalized:
        lowered = text.lower()
        missing = sum(1 for term in ground_truth_terms if term.lower() not in lowered)
        omissions.append(missing / len(ground_truth_terms))
    aggregate = sum(1 for fraction in omissions if fraction > 0) / len(omissions)

    return VariabilityReport(
        question_id=question_id,
        total_responses=len(responses),
        distinct_responses=len(counts),
        pairwise_exact_matches=pairwise,
        per_response_omissions=omissions,
        aggregate_omission_rate=aggregate,
    )


# ---------------------------------------------------------------------------
# Cohort selection
# ---------------------------------------------------------------------------

_AGE_BANDS = ((0, 17, "child"), (18, 40, "young_adult"), (41, 64, "middle_aged"), (65, 200, "senior"))


def _age_band(age: int) -> str:
    for low, high, label in _AGE_BANDS:
        if low <= age <= high:
            return label
    return "unknown"


@dataclass
class CohortCandidate:
    path: Path
    name: str
    gender: str
    age: int
    band: str
    has_allergies: bool
    bucket: int
    conditions: list[str]
    allergies: list[str]
    medications: list[str]


@dataclass
class CohortSelection:
    selected: list[CohortCandidate]
    buckets: list[str]
    seed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "selected": [
                {
                    "bundle": str(c.path),
                    "bucket": self.buckets[c.bucket],
                    "name": c.name,
                    "gender": c.gender,
                    "age": c.age,
                    "conditions": c.conditions,
                    "allergies": c.allergies,
                    "medications": c.medications,
                }
                for c in self.selected
            ],
        }


def _candidate_facts(
    path: Path, bundle: Bundle, reference_date: date, filter_config: FilterConfig
) -> dict[str, Any]:
    demographics = patient_demographics(bundle, reference_date)
    conditions = [compute_identifier(e).display_name for e in bundle.by_kind(CONDITION)]
    allergies = [compute_identifier(e).display_name for e in bundle.by_kind(ALLERGY_INTOLERANCE)]
    catalog = build_catalog(bundle, filter_config, reference_date)
    medications = [
        identifier.display_name
        for identifier, _ in catalog.entries
        if identifier.kind.name == "MedicationRequest"
    ]
    codes = {
        e.primary_code.code
        for e in bundle.by_kind(CONDITION) + bundle.by_kind(PROCEDURE)
        if e.primary_code
    }
    return {
        "demographics": demographics,
        "conditions": conditions,
        "allergies": allergies,
        "medications": medications,
        "codes": codes,
        "deceased": is_deceased(bundle.by_kind(PATIENT)[0]),
    }


def select_cohort(
    patient_dir: str | Path,
    buckets: list[dict[str, Any]],
    min_with_allergies: int = 2,
    seed: int = 0,
    reference_date: date | None = None,
    filter_config: FilterConfig | None = None,
) -> CohortSelection:
    """Select one patient per bucket, balancing gender and age-band coverage.

    Buckets are ``{"name": ..., "codes": [...]}`` condition/procedure code
    sets; each patient joins the first bucket whose codes intersect theirs.
    Deceased patients are excluded. Among assignments satisfying the allergy
    quota, the selection maximizes distinct genders plus distinct age bands
    covered; remaining ties break deterministically by the given seed.

    Raises:
        InfeasibleError: a bucket has no eligible patient, or no assignment
            meets the allergy quota; names the binding constraint.
    """
    reference_date = reference_date or date.today()
    filter_config = filter_config or FilterConfig()
    directory = Path(patient_dir)
    paths = sorted(p for p in directory.glob("*.json") if p.is_file())

    candidates: list[list[CohortCandidate]] = [[] for _ in buckets]
    for path in paths:
        try:
            bundle = parse_bundle(path.read_bytes(), source_label=path.stem)
            facts = _candidate_facts(path, bundle, reference_date, filter_config)
        except Exception:
            continue  # unreadable bundle: not a candidate
        if facts["deceased"]:
            continue
        for bucket_index, bucket in enumerate(buckets):
            if facts["codes"] & set(bucket.get("codes", [])):
                demographics = facts["demographics"]
                candidates[bucket_index].append(
                    CohortCandidate(
                        path=path,
                        name=demographics.display_name,
                        gender=demographics.administrative_gender,
                        age=demographics.age_years,
                        band=_age_band(demographics.age_years),
                        has_allergies=bool(facts["allergies"]),
                        bucket=bucket_index,
                        conditions=facts["conditions"],
                        allergies=facts["allergies"],
                        medications=facts["medications"],
                    )
                )
                break  # first matching bucket only

    bucket_names = [str(b.get("name", f"bucket-{i}")) for i, b in enumerate(buckets)]
    for index, pool in enumerate(candidates):
        if not pool:
            raise InfeasibleError(f"bucket '{bucket_names[index]}' has no eligible patients")

    def tiebreak(candidate: CohortCandidate) -> str:
        return hashlib.sha256(f"{seed}:{candidate.path.name}".encode()).hexdigest()

    # Exact search over compact coverage states: (genders, bands, capped
    # allergy count) is all that matters for the objective and the quota.
    State = tuple[frozenset, frozenset, int]
    states: dict[State, tuple[tuple[str, ...], list[CohortCandidate]]] = {
        (frozenset(), frozenset(), 0): ((), [])
    }
    for pool in candidates:
        next_states: dict[State, tuple[tuple[str, ...], list[CohortCandidate]]] = {}
        for (genders, bands, quota), (keys, chosen) in states.items():
            for candidate in pool:
                new_state = (
                    genders | {candidate.gender},
                    bands | {candidate.band},
                    min(quota + (1 if candidate.has_allergies else 0), min_with_allergies),
                )
                new_keys = tuple(sorted([*keys, tiebreak(candidate)]))
                incumbent = next_states.get(new_state)
                if incumbent is None or new_keys < incumbent[0]:
                    next_states[new_state] = (new_keys, [*chosen, candidate])
        states = next_states

    feasible = {
        state: value for state, value in states.items() if state[2] >= min_with_allergies
    }
    if not feasible:
        raise InfeasibleError("allergy quota")

    # Deterministic final pick: highest coverage, then smallest tiebreak keys.
    top = max(len(s[0]) + len(s[1]) for s in feasible)
    contenders = [s for s in feasible if len(s[0]) + len(s[1]) == top]
    best_state = min(contenders, key=lambda s: feasible[s][0])

    return CohortSelection(selected=feasible[best_state][1], buckets=bucket_names, seed=seed)
