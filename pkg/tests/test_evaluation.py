"""Run plans, score aggregation, variability analytics, cohort selection."""

import itertools
import json
import random
from datetime import date
from pathlib import Path

import pytest

from fhirlit.errors import EmptyInputError, InfeasibleError, NoGroundTruthError
from fhirlit.evaluation import (
    DEFAULT_QUESTIONS,
    QuestionSet,
    RunPlan,
    ScoreSheet,
    aggregate_scores,
    answered_questions,
    load_transcript,
    run_plan,
    select_cohort,
    variability_analysis,
)

from conftest import REFERENCE_DATE, TABLE_FIXTURES
from oracles import two_pass_mean_std

MOCK_CHAT_SCRIPT = {
    "type": "mock",
    "script": [
        {"kind": "call_tool", "tool": "get_resources", "arguments": {"names": ["MedicationRequest"]}},
        {"kind": "emit_text", "text": "Medications found: {tool_results}"},
        {"kind": "emit_text", "text": "Answer about side effects."},
        {"kind": "emit_text", "text": "Answer about allergies."},
        {"kind": "emit_text", "text": "Answer about conditions."},
        {"kind": "emit_text", "text": "Answer about behaviors."},
        {"kind": "emit_text", "text": "Antwort auf Deutsch."},
        {"kind": "emit_text", "text": "Answer about labs."},
    ],
}
MOCK_SUMMARY_SCRIPT = {
    "type": "mock",
    "script": [{"kind": "emit_text", "text": "A short record summary."}],
}


def standard_plan(patients, repetitions) -> RunPlan:
    return RunPlan(
        patients=list(patients),
        repetitions=repetitions,
        chat_backend_spec=MOCK_CHAT_SCRIPT,
        summary_backend_spec=MOCK_SUMMARY_SCRIPT,
        reference_date=REFERENCE_DATE,
    )


class TestQuestionSet:
    def test_default_is_the_standard_seven_in_order(self):
        questions = QuestionSet()
        assert [q.id for q in questions] == ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"]
        assert questions.questions[0].text == (
            "What are my current medications and how should I be taking them?"
        )
        assert questions.questions[2].text == "Am I allergic to any of my medications?"
        assert questions.questions[5].text == (
            "Can you summarize my current medical conditions in German?"
        )

    def test_duplicate_ids_rejected(self):
        from fhirlit.evaluation import Question

        with pytest.raises(ValueError):
            QuestionSet((Question("Q1", "a"), Question("Q1", "b")))


class TestRunPlan:
    def test_full_plan_produces_168_answers_in_24_transcripts(self, tmp_path):
        plan = standard_plan(TABLE_FIXTURES.values(), repetitions=4)
        transcripts = run_plan(plan, tmp_path / "out")
        assert len(transcripts) == 24
        answered = 0
        for path in transcripts:
            events = load_transcript(path)
            pairs = answered_questions(events)
            answered += len(pairs)
            # Questions asked strictly in Q1..Q7 order.
            assert [q for q, _ in pairs] == [text for _, text in DEFAULT_QUESTIONS]
            assert events[0].kind == "cleared"
        assert answered == 168

    def test_single_question_single_run(self, tmp_path):
        plan = standard_plan([TABLE_FIXTURES["milton509"]], repetitions=1)
        plan.questions = QuestionSet(tuple([plan.questions.questions[0]]))
        transcripts = run_plan(plan, tmp_path / "out")
        assert len(transcripts) == 1
        events = load_transcript(transcripts[0])
        assert sum(1 for e in events if e.kind == "user_message") == 1

    def test_rerun_is_byte_identical(self, tmp_path):
        plan = standard_plan(list(TABLE_FIXTURES.values())[:2], repetitions=2)
        first = run_plan(plan, tmp_path / "one")
        second = run_plan(plan, tmp_path / "two")
        for a, b in zip(sorted(first), sorted(second)):
            assert a.name == b.name
            assert a.read_bytes() == b.read_bytes()

    def test_transcript_naming_scheme(self, tmp_path):
        plan = standard_plan([TABLE_FIXTURES["milton509"]], repetitions=2)
        transcripts = run_plan(plan, tmp_path / "out")
        assert sorted(p.name for p in transcripts) == [
            "milton509_ortiz186_1.ndjson",
            "milton509_ortiz186_2.ndjson",
        ]

    def test_metadata_written_with_plan_hash(self, tmp_path):
        plan = standard_plan([TABLE_FIXTURES["milton509"]], repetitions=1)
        run_plan(plan, tmp_path / "out")
        metadata = json.loads((tmp_path / "out" / "run_metadata.json").read_text())
        assert metadata["plan_hash"] == plan.plan_hash()
        assert metadata["runs"] == 1
        assert metadata["failed_runs"] == 0

    def test_backend_failure_aborts_run_but_plan_completes(self, tmp_path):
        # Script ends on a tool call: the second ask exhausts it mid-run.
        failing = {
            "type": "mock",
            "script": [
                {"kind": "emit_text", "text": "first answer"},
                {"kind": "call_tool", "tool": "get_resources", "arguments": {"names": ["MedicationRequest"]}},
            ],
        }
        plan = RunPlan(
            patients=[TABLE_FIXTURES["milton509"], TABLE_FIXTURES["gonzalo160"]],
            repetitions=1,
            chat_backend_spec=failing,
            summary_backend_spec=MOCK_SUMMARY_SCRIPT,
            reference_date=REFERENCE_DATE,
        )
        transcripts = run_plan(plan, tmp_path / "out")
        assert len(transcripts) == 2  # both runs persisted transcripts
        metadata = json.loads((tmp_path / "out" / "run_metadata.json").read_text())
        assert metadata["failed_runs"] == 2
        for path in transcripts:
            events = load_transcript(path)
            assert any(e.kind == "error" for e in events)

    def test_parallel_workers_match_serial_output(self, tmp_path):
        serial = standard_plan(list(TABLE_FIXTURES.values())[:2], repetitions=2)
        parallel = standard_plan(list(TABLE_FIXTURES.values())[:2], repetitions=2)
        parallel.workers = 4
        first = run_plan(serial, tmp_path / "serial")
        second = run_plan(parallel, tmp_path / "parallel")
        for a, b in zip(sorted(first), sorted(second)):
            assert a.read_bytes() == b.read_bytes()

    def test_plan_round_trips_through_json(self, tmp_path):
        plan_path = tmp_path / "plan.json"
        plan = standard_plan([TABLE_FIXTURES["milton509"]], repetitions=2)
        plan_path.write_text(json.dumps(plan.to_dict()))
        loaded = RunPlan.from_file(plan_path)
        assert loaded.plan_hash() == plan.plan_hash()


class TestAggregation:
    def test_worked_example(self):
        sheets = [
            ScoreSheet(transcript="t1", reviewer="r", scores={"Q1": {"accuracy": 4}}),
            ScoreSheet(transcript="t2", reviewer="r", scores={"Q1": {"accuracy": 5}}),
            ScoreSheet(transcript="t3", reviewer="r", scores={"Q1": {"accuracy": 5}}),
            ScoreSheet(transcript="t4", reviewer="r", scores={"Q1": {"accuracy": 4}}),
        ]
        stats = aggregate_scores(sheets)
        cell = stats.cells[("Q1", "accuracy")]
        assert cell.mean == 4.5
        assert cell.std_dev == 0.5
        assert cell.n == 4

    def test_single_score(self):
        stats = aggregate_scores(
            [ScoreSheet(transcript="t", reviewer="", scores={"Q2": {"relevance": 3}})]
        )
        cell = stats.cells[("Q2", "relevance")]
        assert cell.mean == 3
        assert cell.std_dev == 0

    def test_random_sheets_match_two_pass_oracle(self):
        rng = random.Random(13)
        sheets = []
        for index in range(20):
            scores = {
                f"Q{q}": {d: rng.randint(1, 5) for d in ("accuracy", "relevance", "understandability")}
                for q in range(1, 8)
            }
            sheets.append(ScoreSheet(transcript=f"t{index}", reviewer="r", scores=scores))
        stats = aggregate_scores(sheets)
        for (question_id, dimension), cell in stats.cells.items():
            values = [s.scores[question_id][dimension] for s in sheets]
            mean, std = two_pass_mean_std(values)
            assert abs(cell.mean - mean) < 1e-9
            assert abs(cell.std_dev - std) < 1e-9

    def test_sample_std_switch(self):
        sheets = [
            ScoreSheet(transcript=f"t{i}", reviewer="", scores={"Q1": {"accuracy": v}})
            for i, v in enumerate([4, 5, 5, 4])
        ]
        sample = aggregate_scores(sheets, population=False)
        _, expected = two_pass_mean_std([4, 5, 5, 4], population=False)
        assert abs(sample.cells[("Q1", "accuracy")].std_dev - expected) < 1e-12

    def test_empty_input_raises(self):
        with pytest.raises(EmptyInputError):
            aggregate_scores([])

    def test_out_of_range_scores_rejected(self):
        with pytest.raises(ValueError):
            ScoreSheet(transcript="t", reviewer="", scores={"Q1": {"accuracy": 6}})
        with pytest.raises(ValueError):
            ScoreSheet(transcript="t", reviewer="", scores={"Q1": {"novelty": 3}})


def transcript_events_for_answers(answers: list[str]) -> list:
    """Build a minimal Q1..Qn transcript event list with the given answers."""
    from fhirlit.chat import SessionEvent

    events = [SessionEvent("cleared", "", 0)]
    stamp = 1
    for index, answer in enumerate(answers):
        events.append(SessionEvent("user_message", DEFAULT_QUESTIONS[index][1], stamp))
        events.append(SessionEvent("assistant_done", answer, stamp + 1))
        stamp += 2
    return events


class TestVariability:
    def test_four_identical_responses(self):
        transcripts = [
            transcript_events_for_answers(["a1", "a2", "a3", "The same text."] ) for _ in range(4)
        ]
        report = variability_analysis(transcripts, "Q4", ["anything"])
        assert report.total_responses == 4
        assert report.distinct_responses == 1
        assert report.pairwise_exact_matches == 6

    def test_whitespace_normalization_before_matching(self):
        transcripts = [
            transcript_events_for_answers(["x", "x", "x", "Gout  and\nhypertension."]),
            transcript_events_for_answers(["x", "x", "x", "Gout and hypertension."]),
        ]
        report = variability_analysis(transcripts, "Q4", ["gout"])
        assert report.distinct_responses == 1
        assert report.pairwise_exact_matches == 1

    def test_omission_fraction_per_response(self):
        transcripts = [
            transcript_events_for_answers(["x", "x", "x", "You have hypertension."]),
            transcript_events_for_answers(["x", "x", "x", "You have hypertension and gout."]),
        ]
        report = variability_analysis(transcripts, "Q4", ["hypertension", "gout"])
        assert report.per_response_omissions == [0.5, 0.0]
        assert report.aggregate_omission_rate == 0.5

    def test_engineered_one_in_five_omission_rate(self):
        complete = "Your conditions are hypertension, gout, and anemia."
        partial = "Your conditions are hypertension and gout."
        transcripts = [
            transcript_events_for_answers(["x", "x", "x", complete]) for _ in range(4)
        ] + [transcript_events_for_answers(["x", "x", "x", partial])]
        report = variability_analysis(
            transcripts, "Q4", ["hypertension", "gout", "anemia"]
        )
        assert report.aggregate_omission_rate == pytest.approx(0.2)
        assert report.total_responses == 5

    def test_empty_terms_raise(self):
        transcripts = [transcript_events_for_answers(["a", "b", "c", "d"])] * 2
        with pytest.raises(NoGroundTruthError):
            variability_analysis(transcripts, "Q4", [])

    def test_fewer_than_two_responses_raise(self):
        with pytest.raises(ValueError):
            variability_analysis([transcript_events_for_answers(["a", "b", "c", "d"])], "Q4", ["x"])


# ---------------------------------------------------------------------------
# Cohort selection
# ---------------------------------------------------------------------------

BUCKETS = [
    {"name": "aortic_stenosis", "codes": ["60573004"]},
    {"name": "cardiac_arrest", "codes": ["410429000"]},
    {"name": "atrial_fibrillation", "codes": ["49436004"]},
    {"name": "chronic_kidney_disease", "codes": ["433144002"]},
    {"name": "ischemic_heart_disease", "codes": ["414545008"]},
    {"name": "hypertension", "codes": ["59621000"]},
]


def corpus_patient(
    pid: str,
    gender: str,
    age: int,
    condition_codes: list[str],
    allergies: int = 0,
    deceased: bool = False,
) -> dict:
    birth_year = REFERENCE_DATE.year - age
    resources = [
        {
            "resourceType": "Patient",
            "id": pid,
            "name": [{"use": "official", "family": pid.capitalize(), "given": ["Pat"]}],
            "gender": gender,
            "birthDate": f"{birth_year}-01-01",
            **({"deceasedDateTime": f"{REFERENCE_DATE.year - 1}-06-01T00:00:00Z"} if deceased else {}),
        }
    ]
    for index, code in enumerate(condition_codes):
        resources.append(
            {
                "resourceType": "Condition",
                "id": f"{pid}-c{index}",
                "code": {"coding": [{"system": "http://snomed.info/sct", "code": code, "display": f"Condition {code}"}]},
                "onsetDateTime": "2015-01-01",
            }
        )
    for index in range(allergies):
        resources.append(
            {
                "resourceType": "AllergyIntolerance",
                "id": f"{pid}-a{index}",
                "code": {"text": f"Allergen {index}"},
                "recordedDate": "2010-01-01",
            }
        )
    return {
        "resourceType": "Bundle",
        "entry": [{"resource": r} for r in resources],
    }


def write_corpus(directory: Path, patients: list[tuple]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for args in patients:
        document = corpus_patient(*args)
        (directory / f"{args[0]}.json").write_text(json.dumps(document), encoding="utf-8")


STANDARD_CORPUS = [
    # (pid, gender, age, condition codes, allergies, deceased)
    ("p01", "female", 8, ["60573004"], 2, False),
    ("p02", "male", 45, ["60573004"], 0, False),
    ("p03", "female", 49, ["410429000"], 0, False),
    ("p04", "male", 30, ["410429000"], 1, True),
    ("p05", "male", 82, ["49436004", "59621000"], 1, False),
    ("p06", "female", 70, ["49436004"], 0, False),
    ("p07", "female", 72, ["433144002", "414545008"], 0, False),
    ("p08", "male", 55, ["433144002"], 0, False),
    ("p09", "male", 65, ["414545008", "59621000"], 0, False),
    ("p10", "female", 58, ["414545008"], 1, False),
    ("p11", "male", 26, ["59621000"], 0, False),
    ("p12", "female", 33, ["59621000"], 1, False),
    ("p13", "male", 61, ["59621000"], 0, True),
    ("p14", "female", 40, ["195967001"], 0, False),
    ("p15", "male", 22, ["195967001"], 1, False),
    ("p16", "female", 90, ["195967001"], 0, False),
    ("p17", "male", 12, ["40055000"], 0, False),
    ("p18", "female", 67, ["40055000"], 0, False),
    ("p19", "male", 51, [], 0, False),
    ("p20", "female", 29, [], 1, False),
]


def exhaustive_best_coverage(corpus, buckets, min_allergies: int) -> int:
    """Oracle: enumerate every alive one-per-bucket assignment, return the
    best gender+age-band coverage among those meeting the allergy quota."""

    def band(age):
        if age <= 17:
            return "child"
        if age <= 40:
            return "young_adult"
        if age <= 64:
            return "middle_aged"
        return "senior"

    pools = []
    for bucket in buckets:
        pool = []
        for pid, gender, age, codes, allergies, deceased in corpus:
            if deceased:
                continue
            first_match = next(
                (b["name"] for b in buckets if set(codes) & set(b["codes"])), None
            )
            if first_match == bucket["name"]:
                pool.append((pid, gender, band(age), allergies > 0))
        pools.append(pool)
    best = -1
    for combo in itertools.product(*pools):
        if sum(1 for c in combo if c[3]) < min_allergies:
            continue
        coverage = len({c[1] for c in combo}) + len({c[2] for c in combo})
        best = max(best, coverage)
    return best


class TestCohortSelection:
    def test_twenty_patient_corpus_selects_six_valid_balanced(self, tmp_path):
        write_corpus(tmp_path / "corpus", STANDARD_CORPUS)
        selection = select_cohort(
            tmp_path / "corpus", BUCKETS, min_with_allergies=2, seed=0, reference_date=REFERENCE_DATE
        )
        assert len(selection.selected) == 6
        # Exhaustive constraint check over the fixture corpus.
        by_pid = {args[0]: args for args in STANDARD_CORPUS}
        with_allergies = 0
        for candidate, bucket in zip(selection.selected, BUCKETS, strict=True):
            pid = candidate.path.stem
            _, gender, age, codes, allergies, deceased = by_pid[pid]
            assert not deceased
            assert set(codes) & set(bucket["codes"])
            assert candidate.age == age
            with_allergies += 1 if allergies else 0
        assert with_allergies >= 2
        # Optimality against the brute-force enumeration oracle.
        achieved = len({c.gender for c in selection.selected}) + len(
            {c.band for c in selection.selected}
        )
        assert achieved == exhaustive_best_coverage(STANDARD_CORPUS, BUCKETS, 2)

    def test_age_bands_span_child_to_elderly(self, tmp_path):
        write_corpus(tmp_path / "corpus", STANDARD_CORPUS)
        selection = select_cohort(
            tmp_path / "corpus", BUCKETS, min_with_allergies=2, seed=0, reference_date=REFERENCE_DATE
        )
        ages = [c.age for c in selection.selected]
        assert min(ages) < 18
        assert max(ages) > 65

    def test_deterministic_for_fixed_seed(self, tmp_path):
        write_corpus(tmp_path / "corpus", STANDARD_CORPUS)
        runs = [
            select_cohort(
                tmp_path / "corpus", BUCKETS, min_with_allergies=2, seed=42, reference_date=REFERENCE_DATE
            )
            for _ in range(3)
        ]
        names = [[c.path.name for c in run.selected] for run in runs]
        assert names[0] == names[1] == names[2]

    def test_allergy_quota_infeasible_when_allergic_patients_deceased(self, tmp_path):
        corpus = [
            ("q1", "female", 50, ["60573004"], 0, False),
            ("q2", "male", 60, ["410429000"], 0, False),
            ("q3", "female", 70, ["410429000"], 3, True),
            ("q4", "male", 40, ["60573004"], 2, True),
        ]
        write_corpus(tmp_path / "corpus", corpus)
        buckets = BUCKETS[:2]
        with pytest.raises(InfeasibleError) as excinfo:
            select_cohort(tmp_path / "corpus", buckets, min_with_allergies=2, seed=0,
                          reference_date=REFERENCE_DATE)
        assert excinfo.value.binding_constraint == "allergy quota"

    def test_empty_bucket_names_binding_constraint(self, tmp_path):
        write_corpus(tmp_path / "corpus", STANDARD_CORPUS[:2])
        with pytest.raises(InfeasibleError) as excinfo:
            select_cohort(tmp_path / "corpus", BUCKETS, min_with_allergies=1, seed=0,
                          reference_date=REFERENCE_DATE)
        assert "has no eligible patients" in str(excinfo.value)

    def test_shipped_fixtures_reproduce_the_study_cohort(self, fixtures_dir):
        # The six bundled look-alikes land one per bucket; the deceased extra
        # is excluded and the alive extra competes in the hypertension bucket.
        selection = select_cohort(
            fixtures_dir, BUCKETS, min_with_allergies=2, seed=0, reference_date=REFERENCE_DATE
        )
        assert len(selection.selected) == 6
        selected_names = {c.path.stem for c in selection.selected}
        assert "dudley365_blick895.json".removesuffix(".json") not in selected_names
        for required in (
            "beatris270_bogan287",
            "edythe31_mcdermott739",
            "allen332_ferry570",
            "jacklyn830_veum823",
            "gonzalo160_duenas839",
        ):
            assert required in selected_names
        ages = [c.age for c in selection.selected]
        assert min(ages) == 8 and max(ages) == 82
        report = selection.to_dict()
        assert report["selected"][0]["medications"] is not None
