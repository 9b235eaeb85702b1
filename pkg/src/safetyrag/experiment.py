"""Full-factorial experiment runner over (strategy, model, top-k) pipelines.

Every (pipeline, question, replicate) cell produces exactly one run record,
error cells included, appended to a durable JSONL store keyed so an
interrupted run resumes without duplicates. Latency is measured per cell
with a monotonic clock, retrieval and generation timed separately.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .benchmark import BenchmarkItem, BenchmarkSet
from .gateway import (
    ChatProvider,
    ContextBlock,
    DEFAULT_SYSTEM_PROMPT,
    GPT5_MINI,
    GPT5_NANO,
    GatewayError,
    GenerationRequest,
    ModelSpec,
    assemble_prompt,
    compute_cost,
    generate,
    model_by_id,
)
from .retrieval import RetrievalStrategy, Router

RESULTS_SCHEMA_VERSION = 1
DEFAULT_TOP_KS = (3, 7)
DEFAULT_MODELS = (GPT5_MINI, GPT5_NANO)


class ExperimentError(ValueError):
    """Bad grid definition or an unusable results store."""


@dataclass(frozen=True)
class PipelineConfig:
    strategy: RetrievalStrategy
    model: ModelSpec
    top_k: int

    @property
    def id(self) -> str:
        return f"{self.model.model_id}_{self.strategy.value}_{self.top_k}"


def parse_pipeline_id(pipeline_id: str) -> PipelineConfig:
    """Invert the `{model_id}_{strategy}_{top_k}` naming. Strategy tokens
    contain underscores, so parse from the right: k, then the longest
    strategy suffix, then the model id remainder."""
    head, sep, k_token = pipeline_id.rpartition("_")
    if not sep or not k_token.isdigit():
        raise ExperimentError(f"pipeline id {pipeline_id!r} lacks a trailing top-k")
    for strat in sorted(RetrievalStrategy, key=lambda s: -len(s.value)):
        if head.endswith("_" + strat.value):
            model_id = head[: -(len(strat.value) + 1)]
            if not model_id:
                break
            try:
                model = model_by_id(model_id)
            except GatewayError as exc:
                raise ExperimentError(f"pipeline id {pipeline_id!r}: {exc}") from exc
            return PipelineConfig(strategy=strat, model=model, top_k=int(k_token))
    raise ExperimentError(f"pipeline id {pipeline_id!r} has no recognizable strategy")


def enumerate_pipelines(
    strategies: list[RetrievalStrategy] | None = None,
    models: list[ModelSpec] | None = None,
    ks: list[int] | None = None,
) -> list[PipelineConfig]:
    """Cartesian product of the factor levels, ordered lexicographically
    by pipeline id so the grid is stable across runs."""
    strategies = list(strategies) if strategies is not None else list(RetrievalStrategy)
    models = list(models) if models is not None else list(DEFAULT_MODELS)
    ks = list(ks) if ks is not None else list(DEFAULT_TOP_KS)
    if not strategies or not models or not ks:
        raise ExperimentError("every factor needs at least one level")
    for k in ks:
        if k < 1:
            raise ExperimentError(f"top_k must be >= 1, got {k}")
    grid = [
        PipelineConfig(strategy=s, model=m, top_k=k)
        for s in strategies
        for m in models
        for k in ks
    ]
    ids = [p.id for p in grid]
    if len(set(ids)) != len(ids):
        raise ExperimentError("duplicate pipeline ids in grid")
    return sorted(grid, key=lambda p: p.id)


@dataclass
class RunRecord:
    pipeline_id: str
    qid: str
    replicate_id: int
    answer_text: str
    retrieved_chunk_ids: list[str]
    retrieval_time_s: float
    generation_time_s: float
    input_tokens: int
    output_tokens: int
    cost_usd: float
    started_at: str
    status: str = "ok"          # "ok" | "error"
    error: str | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.pipeline_id, self.qid, self.replicate_id)


def record_to_dict(r: RunRecord) -> dict:
    return {
        "pipeline_id": r.pipeline_id,
        "qid": r.qid,
        "replicate_id": r.replicate_id,
        "answer_text": r.answer_text,
        "retrieved_chunk_ids": list(r.retrieved_chunk_ids),
        "retrieval_time_s": r.retrieval_time_s,
        "generation_time_s": r.generation_time_s,
        "input_tokens": r.input_tokens,
        "output_tokens": r.output_tokens,
        "cost_usd": r.cost_usd,
        "started_at": r.started_at,
        "status": r.status,
        "error": r.error,
    }


def record_from_dict(data: dict) -> RunRecord:
    return RunRecord(
        pipeline_id=data["pipeline_id"],
        qid=data["qid"],
        replicate_id=int(data["replicate_id"]),
        answer_text=data["answer_text"],
        retrieved_chunk_ids=list(data["retrieved_chunk_ids"]),
        retrieval_time_s=float(data["retrieval_time_s"]),
        generation_time_s=float(data["generation_time_s"]),
        input_tokens=int(data["input_tokens"]),
        output_tokens=int(data["output_tokens"]),
        cost_usd=float(data["cost_usd"]),
        started_at=data["started_at"],
        status=data.get("status", "ok"),
        error=data.get("error"),
    )


class RunStore:
    """Append-only JSONL results store with a completion-manifest sidecar.

    Existing records are indexed by (pipeline_id, qid, replicate_id) at
    open time; appends of already-present keys are rejected, which is what
    makes resumption duplicate-free.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.manifest_path = self.path.with_name(self.path.name + ".manifest.json")
        self._lock = threading.Lock()
        self._keys: set[tuple[str, str, int]] = set()
        if self.path.exists():
            for r in self.load():
                self._keys.add(r.key)

    def __contains__(self, key: tuple[str, str, int]) -> bool:
        return key in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def append(self, record: RunRecord) -> None:
        with self._lock:
            if record.key in self._keys:
                raise ExperimentError(f"duplicate run key {record.key}")
            line = json.dumps(record_to_dict(record), sort_keys=True) + "\n"
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
            self._keys.add(record.key)

    def load(self) -> list[RunRecord]:
        if not self.path.exists():
            return []
        records = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
        return records

    def write_manifest(
        self,
        pipelines: list[PipelineConfig],
        bench: BenchmarkSet,
        system_prompt: str,
        replicates: int,
        completed: bool,
    ) -> None:
        manifest = {
            "schema_version": RESULTS_SCHEMA_VERSION,
            "system_prompt_sha256": hashlib.sha256(system_prompt.encode()).hexdigest(),
            "pipeline_ids": [p.id for p in pipelines],
            "qids": [item.qid for item in bench.items],
            "replicates": replicates,
            "expected_records": len(pipelines) * len(bench.items) * replicates,
            "record_count": len(self._keys),
            "completed": completed,
        }
        self.manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_records(path: str | Path) -> list[RunRecord]:
    return RunStore(path).load()


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def run_cell(
    pipeline: PipelineConfig,
    item: BenchmarkItem,
    router: Router,
    provider: ChatProvider,
    system_prompt: str,
    replicate_id: int = 1,
) -> RunRecord:
    """Execute one grid cell: retrieve, assemble, generate, account.

    Any retrieval or provider failure becomes an error-status record with
    zeroed usage; cells are never silently skipped.
    """
    started = _utcnow()
    t0 = time.perf_counter()
    try:
        hits = router.retrieve(pipeline.strategy, item.question, pipeline.top_k)
        retrieval_time = time.perf_counter() - t0
        blocks = [
            ContextBlock(
                chunk_id=h.chunk_id,
                doc_id=h.citation.doc_id,
                section_title=h.citation.section_title,
                page_start=h.citation.page_start,
                page_end=h.citation.page_end,
                text=router.chunk_text(h.chunk_id),
            )
            for h in hits
        ]
        request = GenerationRequest(
            model=pipeline.model,
            system_prompt=system_prompt,
            user_content=assemble_prompt(item.question, blocks),
        )
        result = generate(request, provider)
        return RunRecord(
            pipeline_id=pipeline.id,
            qid=item.qid,
            replicate_id=replicate_id,
            answer_text=result.text,
            retrieved_chunk_ids=[h.chunk_id for h in hits],
            retrieval_time_s=retrieval_time,
            generation_time_s=result.wall_time_s,
            input_tokens=result.input_tokens,
            output_tokens=result.output_tokens,
            cost_usd=compute_cost(result.input_tokens, result.output_tokens, pipeline.model),
            started_at=started,
        )
    except Exception as exc:
        return RunRecord(
            pipeline_id=pipeline.id,
            qid=item.qid,
            replicate_id=replicate_id,
            answer_text="",
            retrieved_chunk_ids=[],
            retrieval_time_s=time.perf_counter() - t0,
            generation_time_s=0.0,
            input_tokens=0,
            output_tokens=0,
            cost_usd=0.0,
            started_at=started,
            status="error",
            error=f"{type(exc).__name__}: {exc}",
        )


def run_experiment(
    bench: BenchmarkSet,
    pipelines: list[PipelineConfig],
    router: Router,
    provider: ChatProvider,
    store: RunStore,
    system_prompt: str = DEFAULT_SYSTEM_PROMPT,
    concurrency: int = 1,
    replicates: int = 1,
) -> list[RunRecord]:
    """Fill the (pipeline x question x replicate) grid, resuming past any
    records already in the store. Returns the full grid's records."""
    if concurrency < 1:
        raise ExperimentError("concurrency must be >= 1")
    if replicates < 1:
        raise ExperimentError("replicates must be >= 1")
    bench.validate()
    cells = [
        (pipeline, item, rep)
        for pipeline in pipelines
        for item in bench.items
        for rep in range(1, replicates + 1)
    ]
    wanted = {(p.id, item.qid, rep) for p, item, rep in cells}
    pending = [(p, item, rep) for p, item, rep in cells if (p.id, item.qid, rep) not in store]
    store.write_manifest(pipelines, bench, system_prompt, replicates, completed=False)
    try:
        if concurrency == 1:
            for pipeline, item, rep in pending:
                store.append(run_cell(pipeline, item, router, provider, system_prompt, rep))
        else:
            with ThreadPoolExecutor(max_workers=concurrency) as pool:
                futures = [
                    pool.submit(run_cell, pipeline, item, router, provider, system_prompt, rep)
                    for pipeline, item, rep in pending
                ]
                for fut in futures:
                    store.append(fut.result())
    finally:
        done = all(key in store for key in wanted)
        store.write_manifest(pipelines, bench, system_prompt, replicates, completed=done)
    by_key = {r.key: r for r in store.load() if r.key in wanted}
    return [by_key[key] for key in sorted(by_key)]


def audit_costs(records: list[RunRecord]) -> list[tuple[str, str, int]]:
    """Recompute every record's cost from its stored token counts and
    pipeline's model; return the keys whose stored cost differs at all."""
    mismatches = []
    for r in records:
        model = parse_pipeline_id(r.pipeline_id).model
        if r.cost_usd != compute_cost(r.input_tokens, r.output_tokens, model):
            mismatches.append(r.key)
    return mismatches
