#!/usr/bin/env python3
"""Run the whole workbench offline: ingest the sample corpus, fill the
24-pipeline grid with the deterministic mock provider, judge every cell,
and print the main-effects report.

Usage:
    python3 scripts/run_mock_pipeline.py [--workdir OUT] [--keep]

Everything lands under --workdir (default: a fresh temp directory, removed
on exit unless --keep).
"""

import argparse
import json
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from safetyrag.benchmark import load_benchmark
from safetyrag.evaluation import aggregate_accuracy, evaluate_records, format_accuracy, save_verdicts
from safetyrag.experiment import RunStore, audit_costs, enumerate_pipelines, run_experiment
from safetyrag.gateway import MockChatProvider
from safetyrag.ingest import ingest_documents, parse_source_documents, write_corpus
from safetyrag.retrieval import build_router
from safetyrag.stats import main_effects_report, render_report_text, report_to_dict, write_csvs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", help="output directory (default: temp)")
    parser.add_argument("--keep", action="store_true", help="keep the temp workdir")
    args = parser.parse_args()

    if args.workdir:
        workdir = Path(args.workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        cleanup = False
    else:
        workdir = Path(tempfile.mkdtemp(prefix="safetyrag-mock-"))
        cleanup = not args.keep

    try:
        data = json.loads((ROOT / "data" / "sample_corpus.json").read_text(encoding="utf-8"))
        corpus_id, docs = parse_source_documents(data)
        chunks = ingest_documents(docs)
        write_corpus(chunks, workdir / "corpus", corpus_id=corpus_id)
        print(f"[1/4] ingested {len(docs)} documents -> {len(chunks)} chunks")

        router = build_router(chunks)
        bench = load_benchmark(ROOT / "data" / "benchmark_mini.jsonl")
        pipelines = enumerate_pipelines()
        store = RunStore(workdir / "runs.jsonl")
        records = run_experiment(bench, pipelines, router, MockChatProvider(), store)
        mismatches = audit_costs(records)
        print(
            f"[2/4] grid: {len(pipelines)} pipelines x {len(bench)} questions = "
            f"{len(records)} records, {len(mismatches)} cost mismatches"
        )

        result = evaluate_records(records, bench, judge="mock")
        save_verdicts(result, workdir / "verdicts.jsonl")
        correct = sum(1 for v in result.verdicts if v.correct)
        print(f"[3/4] judged {len(result.verdicts)} cells, {correct} correct")
        print(format_accuracy(aggregate_accuracy(result.verdicts, group_by="strategy")))

        report = main_effects_report(records, result.verdicts)
        (workdir / "report.json").write_text(
            json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8"
        )
        write_csvs(report, records, workdir / "csv")
        print(f"[4/4] report -> {workdir / 'report.json'}")
        print()
        print(render_report_text(report))
        return 1 if mismatches else 0
    finally:
        if cleanup:
            shutil.rmtree(workdir, ignore_errors=True)
        else:
            print(f"\nartifacts kept in {workdir}")


if __name__ == "__main__":
    sys.exit(main())
