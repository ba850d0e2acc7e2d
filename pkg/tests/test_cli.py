"""CLI surfaces: catalog, summarize, eval subcommands, cohort select."""

import json
from pathlib import Path

from click.testing import CliRunner

from fhirlit.cli import main

from conftest import FIXTURES_DIR, TABLE_FIXTURES
from test_evaluation import BUCKETS, MOCK_CHAT_SCRIPT, MOCK_SUMMARY_SCRIPT


def invoke(*args, **kwargs):
    runner = CliRunner()
    result = runner.invoke(main, list(args), catch_exceptions=False, **kwargs)
    return result


def test_catalog_prints_one_line_per_entry():
    result = invoke(
        "catalog", str(TABLE_FIXTURES["beatris270"]), "--reference-date", "2024-01-15"
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[0].startswith("# Beatris270 Bogan287 | female | 8 years")
    allergy_lines = [l for l in lines if l.startswith("AllergyIntolerance | ")]
    assert len(allergy_lines) == 8


def test_catalog_respects_filter_config(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"filter": {"max_catalog_entries": 3}}))
    result = invoke(
        "catalog",
        str(TABLE_FIXTURES["gonzalo160"]),
        "--config",
        str(config_path),
        "--reference-date",
        "2024-01-15",
    )
    assert result.exit_code == 0
    entry_lines = [l for l in result.output.strip().splitlines() if not l.startswith("#")]
    assert len(entry_lines) == 3


def test_summarize_with_mock_backend():
    result = invoke(
        "summarize",
        str(TABLE_FIXTURES["gonzalo160"]),
        "--id",
        "gonzalo160-obs-2",
        "--backend",
        "mock",
    )
    assert result.exit_code == 0
    assert "== Summary" in result.output
    assert "== Interpretation" in result.output


def test_summarize_unknown_id_fails_cleanly():
    result = CliRunner().invoke(
        main,
        ["summarize", str(TABLE_FIXTURES["milton509"]), "--id", "ghost", "--backend", "mock"],
    )
    assert result.exit_code != 0
    assert "no resource" in result.output


def plan_file(tmp_path: Path, patients=None, repetitions=1) -> Path:
    plan = {
        "patients": [str(p) for p in (patients or [TABLE_FIXTURES["milton509"]])],
        "repetitions": repetitions,
        "locale": "en-US",
        "reference_date": "2024-01-15",
        "chat_backend": MOCK_CHAT_SCRIPT,
        "summary_backend": MOCK_SUMMARY_SCRIPT,
    }
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    return path


def test_eval_run_score_aggregate_round_trip(tmp_path):
    plan_path = plan_file(tmp_path)
    out_dir = tmp_path / "run"
    result = invoke("eval", "run", "--plan", str(plan_path), "--out", str(out_dir))
    assert result.exit_code == 0
    transcripts = sorted(out_dir.glob("*.ndjson"))
    assert len(transcripts) == 1

    # 7 questions x 3 dimensions of interactive 1..5 prompts.
    answers = "\n".join(["4", "5", "4"] * 7) + "\n"
    result = invoke("eval", "score", str(transcripts[0]), "--reviewer", "dr-a", input=answers)
    assert result.exit_code == 0
    sheet_path = transcripts[0].with_suffix(".scores.json")
    assert sheet_path.exists()
    sheet = json.loads(sheet_path.read_text())
    assert sheet["reviewer"] == "dr-a"
    assert sheet["scores"]["Q1"] == {"accuracy": 4, "relevance": 5, "understandability": 4}

    result = invoke("eval", "aggregate", str(out_dir))
    assert result.exit_code == 0
    stats = json.loads((out_dir / "stats.json").read_text())
    assert stats["per_question"]["Q1"]["accuracy"]["mean"] == 4.0
    assert (out_dir / "stats.csv").read_text().startswith("question,dimension,mean,std_dev,n")


def test_eval_variability(tmp_path):
    plan_path = plan_file(tmp_path, repetitions=3)
    out_dir = tmp_path / "run"
    invoke("eval", "run", "--plan", str(plan_path), "--out", str(out_dir))
    truth_path = tmp_path / "truth.json"
    truth_path.write_text(json.dumps({"terms": ["conditions"]}))
    result = invoke(
        "eval", "variability", str(out_dir), "--question", "Q4", "--truth", str(truth_path)
    )
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["total_responses"] == 3
    assert report["distinct_responses"] == 1
    assert report["pairwise_exact_matches"] == 3
    assert report["aggregate_omission_rate"] == 0.0


def test_cohort_select_on_shipped_fixtures(tmp_path):
    buckets_path = tmp_path / "buckets.json"
    buckets_path.write_text(json.dumps(BUCKETS))
    out_path = tmp_path / "cohort.json"
    result = invoke(
        "cohort",
        "select",
        str(FIXTURES_DIR),
        "--buckets",
        str(buckets_path),
        "--reference-date",
        "2024-01-15",
        "--out",
        str(out_path),
    )
    assert result.exit_code == 0
    report = json.loads(out_path.read_text())
    assert len(report["selected"]) == 6
    buckets_covered = {entry["bucket"] for entry in report["selected"]}
    assert buckets_covered == {b["name"] for b in BUCKETS}


def test_cohort_select_reports_binding_constraint(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "only.json").write_text(
        json.dumps(
            {
                "resourceType": "Bundle",
                "entry": [
                    {"resource": {"resourceType": "Patient", "id": "x", "birthDate": "1980-01-01"}},
                    {
                        "resource": {
                            "resourceType": "Condition",
                            "id": "c",
                            "code": {"coding": [{"code": "60573004"}]},
                        }
                    },
                ],
            }
        )
    )
    buckets_path = tmp_path / "buckets.json"
    buckets_path.write_text(json.dumps(BUCKETS[:1]))
    result = CliRunner().invoke(
        main,
        ["cohort", "select", str(corpus), "--buckets", str(buckets_path), "--min-allergies", "2"],
    )
    assert result.exit_code != 0
    assert "allergy quota" in result.output
