"""Command-line interface: catalog, summarize, eval, cohort, serve."""

from __future__ import annotations

import json
import sys
from datetime import date
from pathlib import Path

import click

from .backend import backend_from_spec
from .errors import FhirlitError
from .evaluation import (
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
from .fhir_model import parse_bundle
from .pipeline import FilterConfig, build_catalog
from .summarize import interpret_resource, summarize_resource


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _filter_from_config(config: dict) -> FilterConfig:
    return FilterConfig.from_dict(config.get("filter", {}))


def _parse_date(value: str | None) -> date | None:
    return date.fromisoformat(value) if value else None


@click.group()
def main() -> None:
    """Converse with FHIR health records through an LLM."""


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON config file.")
@click.option("--reference-date", help="Age reference date (YYYY-MM-DD, default today).")
def catalog(bundle_path: str, config_path: str | None, reference_date: str | None) -> None:
    """Print the filtered identifier catalog of a bundle, one entry per line."""
    config = _load_config(config_path)
    bundle = parse_bundle(Path(bundle_path).read_bytes(), source_label=Path(bundle_path).stem)
    built = build_catalog(bundle, _filter_from_config(config), _parse_date(reference_date))
    patient = built.patient
    click.echo(
        f"# {patient.display_name} | {patient.administrative_gender} | "
        f"{patient.age_years} years | {len(built.entries)} entries"
    )
    for name in built.rendered_names():
        click.echo(name)


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--id", "logical_id", required=True, help="Logical id of the resource.")
@click.option("--locale", default="en-US", show_default=True)
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(["live", "mock"]),
    default="live",
    show_default=True,
)
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON config file.")
@click.option(
    "--cache-dir",
    type=click.Path(file_okay=False),
    help="Directory for the append-only summary cache (no caching when omitted).",
)
def summarize(
    bundle_path: str,
    logical_id: str,
    locale: str,
    backend_kind: str,
    config_path: str | None,
    cache_dir: str | None,
) -> None:
    """Print the summary, then the interpretation, of one resource."""
    from .summarize import SummaryCache

    config = _load_config(config_path)
    bundle = parse_bundle(Path(bundle_path).read_bytes(), source_label=Path(bundle_path).stem)
    envelope = next((e for e in bundle.entries if e.logical_id == logical_id), None)
    if envelope is None:
        raise click.ClickException(f"no resource with id {logical_id!r}")
    spec = config.get("backend", {"type": backend_kind})
    if backend_kind == "mock" and spec.get("type") != "mock":
        spec = {
            "type": "mock",
            "script": [{"kind": "emit_text", "text": "Mock summary: {last_user}"}],
        }
    backend = backend_from_spec(spec)
    cache = None
    if cache_dir:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        cache = SummaryCache(Path(cache_dir) / "summary_cache.ndjson")
    try:
        summary = summarize_resource(envelope, backend, locale=locale, cache=cache)
        interpretation = interpret_resource(envelope, backend, locale=locale)
    except FhirlitError as exc:
        raise click.ClickException(exc.message) from exc
    click.echo(f"== Summary ({summary.word_count} words)")
    click.echo(summary.summary_text)
    click.echo("== Interpretation")
    click.echo(interpretation.interpretation_text)


@main.group(name="eval")
def eval_group() -> None:
    """Evaluation protocol: run plans, score, aggregate, variability."""


@eval_group.command(name="run")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False))
def eval_run(plan_path: str, output_dir: str) -> None:
    """Execute a run plan and write one transcript per (patient, repetition)."""
    plan = RunPlan.from_file(plan_path)
    transcripts = run_plan(plan, output_dir)
    click.echo(f"wrote {len(transcripts)} transcripts to {output_dir}")


@eval_group.command(name="score")
@click.argument("transcript_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--reviewer", default="", help="Reviewer label recorded on the sheet.")
@click.option("--out", "output_path", type=click.Path(dir_okay=False))
def eval_score(transcript_path: str, reviewer: str, output_path: str | None) -> None:
    """Interactively fill a Likert score sheet (1..5) for one transcript."""
    events = load_transcript(transcript_path)
    pairs = answered_questions(events)
    if not pairs:
        raise click.ClickException("transcript contains no answered questions")
    questions = QuestionSet()
    scores: dict[str, dict[str, int]] = {}
    for index, (question_text, answer) in enumerate(pairs):
        question_id = (
            questions.questions[index].id if index < len(questions) else f"Q{index + 1}"
        )
        click.echo(f"\n--- {question_id}: {question_text}\n{answer}\n")
        scores[question_id] = {
            dimension: click.prompt(
                f"{question_id} {dimension} (1..5)", type=click.IntRange(1, 5)
            )
            for dimension in ("accuracy", "relevance", "understandability")
        }
    sheet = ScoreSheet(transcript=Path(transcript_path).name, reviewer=reviewer, scores=scores)
    target = Path(output_path) if output_path else Path(transcript_path).with_suffix(".scores.json")
    target.write_text(json.dumps(sheet.to_dict(), indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {target}")


@eval_group.command(name="aggregate")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--out-prefix", default="stats", show_default=True)
@click.option("--sample-std", is_flag=True, help="Use the sample (n-1) estimator.")
def eval_aggregate(directory: str, out_prefix: str, sample_std: bool) -> None:
    """Aggregate *.scores.json sheets into mean/std per question and dimension."""
    sheets = [ScoreSheet.from_file(p) for p in sorted(Path(directory).glob("*.scores.json"))]
    if not sheets:
        raise click.ClickException(f"no *.scores.json files in {directory}")
    stats = aggregate_scores(sheets, population=not sample_std)
    json_path = Path(directory) / f"{out_prefix}.json"
    json_path.write_text(json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8")
    csv_path = Path(directory) / f"{out_prefix}.csv"
    lines = ["question,dimension,mean,std_dev,n"]
    lines += [f"{q},{d},{mean:.6f},{std:.6f},{n}" for q, d, mean, std, n in stats.to_rows()]
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {json_path} and {csv_path}")
    for question_id, dimension, mean, std, n in stats.to_rows():
        click.echo(f"{question_id} {dimension}: mean={mean:.2f} std={std:.2f} n={n}")


@eval_group.command(name="variability")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--question", "question_id", default="Q4", show_default=True)
@click.option(
    "--truth",
    "truth_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help='JSON ground-truth terms: ["term", ...] or {"terms": [...]}.',
)
def eval_variability(directory: str, question_id: str, truth_path: str) -> None:
    """Variability and omission report for one question across transcripts."""
    truth = json.loads(Path(truth_path).read_text(encoding="utf-8"))
    terms = truth["terms"] if isinstance(truth, dict) else truth
    transcripts = [load_transcript(p) for p in sorted(Path(directory).glob("*.ndjson"))]
    try:
        report = variability_analysis(transcripts, question_id, list(terms))
    except FhirlitError as exc:
        raise click.ClickException(exc.message) from exc
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.group()
def cohort() -> None:
    """Patient cohort selection."""


@cohort.command(name="select")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--buckets",
    "buckets_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help='JSON list of {"name", "codes"} condition/procedure buckets.',
)
@click.option("--seed", default=0, show_default=True)
@click.option("--min-allergies", default=2, show_default=True)
@click.option("--reference-date", help="Age reference date (YYYY-MM-DD, default today).")
@click.option("--out", "output_path", type=click.Path(dir_okay=False))
def cohort_select(
    directory: str,
    buckets_path: str,
    seed: int,
    min_allergies: int,
    reference_date: str | None,
    output_path: str | None,
) -> None:
    """Select one patient per bucket under the documented balance rules."""
    buckets = json.loads(Path(buckets_path).read_text(encoding="utf-8"))
    try:
        selection = select_cohort(
            directory,
            buckets,
            min_with_allergies=min_allergies,
            seed=seed,
            reference_date=_parse_date(reference_date),
        )
    except FhirlitError as exc:
        raise click.ClickException(exc.message) from exc
    report = json.dumps(selection.to_dict(), indent=2, ensure_ascii=False)
    if output_path:
        Path(output_path).write_text(report + "\n", encoding="utf-8")
        click.echo(f"wrote {output_path}")
    else:
        click.echo(report)


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", required=True, type=click.Path(file_okay=False))
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(["mock", "live"]),
    default="mock",
    show_default=True,
)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def serve(port: int, host: str, data_dir: str, backend_kind: str, config_path: str | None) -> None:
    """Run the HTTP service that the web chat client consumes."""
    import uvicorn

    from .service import create_app, load_service_config

    config = load_service_config(data_dir, config_path)
    if not config_path:
        config.chat_backend_spec = {"type": backend_kind}
        if backend_kind == "mock":
            config.chat_backend_spec["script"] = [
                {"kind": "call_tool", "tool": "get_resources", "arguments": {"names": ["MedicationRequest"]}},
                {"kind": "emit_text", "text": "Here is what I found in your records:\n{tool_results}"},
            ]
            config.summary_backend_spec = {
                "type": "mock",
                "script": [{"kind": "emit_text", "text": "A short plain-language summary of this record."}],
            }
    Path(data_dir).mkdir(parents=True, exist_ok=True)
    uvicorn.run(create_app(config), host=host, port=port, log_level="info")


if __name__ == "__main__":
    sys.exit(main())
