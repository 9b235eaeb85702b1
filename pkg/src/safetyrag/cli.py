"""Command-line entry point wiring every phase: ingest, index, query,
benchmark utilities, the factorial experiment, judging, statistics, and
the HTTP service."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .benchmark import BenchmarkError, item_to_dict, load_benchmark, sample
from .evaluation import (
    EvaluationError,
    evaluate_records,
    save_verdicts,
    load_verdicts,
)
from .experiment import (
    DEFAULT_MODELS,
    DEFAULT_TOP_KS,
    ExperimentError,
    RunStore,
    audit_costs,
    enumerate_pipelines,
    load_records,
    run_experiment,
)
from .gateway import (
    DEFAULT_SYSTEM_PROMPT,
    GatewayError,
    KNOWN_MODELS,
    LLM_URL_ENV,
    MockChatProvider,
    chat_provider_from_env,
    model_by_id,
)
from .indexing import IndexingError, TrigramEmbedder, save_indices, tokenize_chunks
from .indexing import bm25_build, build_graph, build_vector_index
from .ingest import IngestError, ingest_documents, load_corpus, parse_source_documents, write_corpus
from .retrieval import (
    RetrievalError,
    RetrievalStrategy,
    build_router,
    remote_search_from_env,
)
from .stats import (
    StatsError,
    main_effects_report,
    render_report_text,
    report_to_dict,
    write_csvs,
)

KNOWN_ERRORS = (
    BenchmarkError,
    EvaluationError,
    ExperimentError,
    GatewayError,
    IndexingError,
    IngestError,
    RetrievalError,
    StatsError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _provider(name: str):
    if name == "mock":
        return MockChatProvider()
    if name == "live":
        if not os.environ.get(LLM_URL_ENV):
            raise GatewayError(f"live provider needs {LLM_URL_ENV} set")
        return chat_provider_from_env()
    raise GatewayError(f"unknown provider {name!r}")


def _router_for(corpus_dir: str):
    manifest, chunks = load_corpus(corpus_dir)
    return manifest, build_router(chunks, remote=remote_search_from_env())


def _system_prompt(path: str | None) -> str:
    if path:
        return Path(path).read_text(encoding="utf-8")
    return DEFAULT_SYSTEM_PROMPT


def cmd_ingest(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.infile).read_text(encoding="utf-8"))
    corpus_id, docs = parse_source_documents(data)
    chunks = ingest_documents(docs, threshold_words=args.threshold_words)
    manifest = write_corpus(chunks, Path(args.out), corpus_id=corpus_id)
    print(f"ingested {len(docs)} documents into {len(manifest.chunks)} chunks at {args.out}")
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    manifest, chunks = load_corpus(args.corpus)
    embedder = TrigramEmbedder()
    tokenized = tokenize_chunks(chunks)
    bm25 = bm25_build(tokenized, k1=args.k1, b=args.b)
    vectors = build_vector_index(chunks, embedder)
    graph = build_graph(chunks)
    save_indices(args.out, bm25, vectors, graph)
    print(
        f"indexed {len(chunks)} chunks from {manifest.corpus_id}: "
        f"bm25 terms={len(bm25.term_doc_freq)}, vectors dims={vectors.dims}, "
        f"graph edges={len(graph.edges)}"
    )
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    _, router = _router_for(args.corpus)
    hits = router.retrieve(args.strategy, args.question, args.k)
    if args.json:
        print(
            json.dumps(
                [
                    {
                        "chunk_id": h.chunk_id,
                        "score": h.score,
                        "rank": h.rank,
                        "strategy": h.strategy.value,
                        "doc_id": h.citation.doc_id,
                        "section_title": h.citation.section_title,
                        "page_start": h.citation.page_start,
                        "page_end": h.citation.page_end,
                    }
                    for h in hits
                ],
                indent=2,
            )
        )
        return 0
    for h in hits:
        print(f"{h.rank:>2}. {h.score:10.4f}  {h.chunk_id}")
    if not hits:
        print("no results")
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    bench = load_benchmark(args.file)
    if args.action == "validate":
        counts = ", ".join(f"{m}={n}" for m, n in sorted(bench.machine_counts.items()))
        print(f"ok: {len(bench)} items ({counts})")
        return 0
    items = sample(bench, args.n, args.seed)
    if args.json:
        print(json.dumps([item_to_dict(i) for i in items], indent=2))
    else:
        for item in items:
            print(f"{item.qid}  [{item.machine.value}/{item.difficulty.value}]  {item.question}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    bench = load_benchmark(args.benchmark)
    _, router = _router_for(args.corpus)
    strategies = (
        [RetrievalStrategy(s) for s in args.strategies.split(",")] if args.strategies else None
    )
    models = [model_by_id(m) for m in args.models.split(",")] if args.models else None
    ks = [int(k) for k in args.ks.split(",")] if args.ks else None
    pipelines = enumerate_pipelines(strategies, models, ks)
    provider = _provider(args.provider)
    store = RunStore(args.out)
    system_prompt = _system_prompt(args.system_prompt)
    records = run_experiment(
        bench,
        pipelines,
        router,
        provider,
        store,
        system_prompt=system_prompt,
        concurrency=args.concurrency,
        replicates=args.replicates,
    )
    mismatches = audit_costs(records)
    errors = sum(1 for r in records if r.status != "ok")
    print(
        f"grid complete: {len(pipelines)} pipelines x {len(bench)} questions = "
        f"{len(records)} records ({errors} errors, {len(mismatches)} cost mismatches) -> {args.out}"
    )
    return 0 if not mismatches else 1


def cmd_evaluate(args: argparse.Namespace) -> int:
    bench = load_benchmark(args.benchmark)
    records = load_records(args.results)
    judge_provider = None
    if args.judge == "llm":
        judge_provider = _provider("live")
    result = evaluate_records(
        records,
        bench,
        judge=args.judge,
        judge_provider=judge_provider,
        judge_model_id=args.judge_model,
    )
    save_verdicts(result, args.out)
    correct = sum(1 for v in result.verdicts if v.correct)
    print(
        f"judged {len(result.verdicts)} cells ({correct} correct, "
        f"{len(result.unjudged)} unjudged) -> {args.out}"
    )
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    records = load_records(args.records)
    verdicts = load_verdicts(args.verdicts).verdicts
    report = main_effects_report(records, verdicts, mcnemar_continuity=args.mcnemar_continuity)
    _write_atomic(Path(args.out), json.dumps(report_to_dict(report), indent=2) + "\n")
    if args.csv_dir:
        paths = write_csvs(report, records, args.csv_dir)
        print(f"wrote {', '.join(str(p) for p in paths)}")
    if args.text:
        print(render_report_text(report))
    else:
        print(f"report -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceState, build_campaign, create_app

    _, router = _router_for(args.corpus)
    state = ServiceState(
        router=router,
        provider=_provider(args.provider),
        system_prompt=_system_prompt(args.system_prompt),
        log_dir=Path(args.log_dir) if args.log_dir else None,
    )
    if args.campaign:
        payload = json.loads(Path(args.campaign).read_text(encoding="utf-8"))
        state.load_campaign(
            build_campaign(
                payload["campaign_id"],
                payload["pipeline_1"],
                payload["pipeline_2"],
                payload["items"],
                payload.get("seed", 0),
            )
        )
    app = create_app(state, cors_origins=args.cors_origin.split(",") if args.cors_origin else None)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safetyrag",
        description="grounded QA over machine-safety documents with a factorial evaluation bench",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="segment source documents into a chunk corpus")
    p.add_argument("--in", dest="infile", required=True, help="source documents JSON")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--threshold-words", type=int, default=3000)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build and save bm25, vector, and graph indices")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="index output directory")
    p.add_argument("--k1", type=float, default=1.5)
    p.add_argument("--b", type=float, default=0.75)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="run one retrieval query")
    p.add_argument("--corpus", required=True)
    p.add_argument("--strategy", default="bm25", choices=[s.value for s in RetrievalStrategy])
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--json", action="store_true")
    p.add_argument("question")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("benchmark", help="validate or sample a benchmark file")
    p.add_argument("action", choices=["validate", "sample"])
    p.add_argument("file")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("experiment", help="run the factorial grid")
    p.add_argument("action", choices=["run"])
    p.add_argument("--benchmark", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="results JSONL (appended, resumable)")
    p.add_argument("--provider", default="mock", choices=["mock", "live"])
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--strategies", help="comma list; default all six")
    p.add_argument("--models", help=f"comma list; default {','.join(KNOWN_MODELS)}")
    p.add_argument("--ks", help=f"comma list; default {','.join(map(str, DEFAULT_TOP_KS))}")
    p.add_argument("--system-prompt", help="path to a system prompt file")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("evaluate", help="judge a results file against the benchmark")
    p.add_argument("--results", required=True)
    p.add_argument("--benchmark", required=True)
    p.add_argument("--judge", default="exact", choices=["exact", "mock", "llm"])
    p.add_argument("--judge-model", default="gpt-5-mini-2025-08-07")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="main-effects report from records and verdicts")
    p.add_argument("--records", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--mcnemar-continuity", action="store_true")
    p.add_argument("--text", action="store_true", help="print the human-readable tables")
    p.add_argument("--csv-dir", help="also emit plotting CSVs here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--corpus", required=True)
    p.add_argument("--provider", default="mock", choices=["mock", "live"])
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--log-dir")
    p.add_argument("--campaign", help="comparison campaign JSON file")
    p.add_argument("--system-prompt", help="path to a system prompt file")
    p.add_argument("--cors-origin", help="comma list of allowed origins (default *)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
