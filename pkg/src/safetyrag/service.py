"""HTTP service: grounded chat with citations, retrieval inspection,
configuration listing, session logging, and blind A/B comparison.

Graders in the comparison workflow only ever see answers labeled A and B;
the mapping back to pipelines lives server-side and is applied when votes
are aggregated. Session analytics append to one JSONL file per day.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .benchmark import BenchmarkSet, sample
from .experiment import PipelineConfig, RunRecord, enumerate_pipelines, parse_pipeline_id
from .gateway import (
    ChatProvider,
    ContextBlock,
    DEFAULT_SYSTEM_PROMPT,
    GenerationRequest,
    assemble_prompt,
    compute_cost,
    generate,
    model_by_id,
)
from .httpclient import TransportError
from .retrieval import RetrievalError, RetrievalStrategy, Router

DEFAULT_PIPELINE_ID = "gpt-5-mini-2025-08-07_remote_keyword_7"


class ServiceError(ValueError):
    """Invalid service configuration or campaign definition."""


@dataclass
class ComparisonTask:
    task_id: str
    qid: str
    question: str
    answer_a: str
    answer_b: str
    pipeline_a: str   # hidden from graders
    pipeline_b: str   # hidden from graders
    order_seed: int   # parity encodes which pipeline landed on A


def assignment_from_seed(order_seed: int) -> bool:
    """True when the campaign's first pipeline is shown as answer A."""
    return order_seed % 2 == 0


@dataclass
class Campaign:
    campaign_id: str
    pipeline_1: str
    pipeline_2: str
    tasks: list[ComparisonTask]


@dataclass
class Vote:
    task_id: str
    grader_id: str
    choice: str  # "a" | "b" | "tie"
    timestamp: str


def build_campaign(
    campaign_id: str,
    pipeline_1: str,
    pipeline_2: str,
    items: list[dict],
    seed: int,
) -> Campaign:
    """Assemble blind tasks from (question, answer_1, answer_2) items.

    A/B order is balanced: exactly half the tasks (within one for odd
    counts) show pipeline_1 as A, positions shuffled by the seed. Each
    task records an order seed whose parity reproduces its assignment.
    """
    if pipeline_1 == pipeline_2:
        raise ServiceError("comparison needs two distinct pipelines")
    if not items:
        raise ServiceError("campaign needs at least one item")
    rng = random.Random(seed)
    n = len(items)
    first_is_a = [True] * ((n + 1) // 2) + [False] * (n // 2)
    rng.shuffle(first_is_a)
    tasks = []
    for i, (item, p1_is_a) in enumerate(zip(items, first_is_a)):
        order_seed = rng.randrange(1 << 30) * 2 + (0 if p1_is_a else 1)
        answer_1, answer_2 = str(item["answer_1"]), str(item["answer_2"])
        tasks.append(
            ComparisonTask(
                task_id=f"{campaign_id}-t{i + 1:03d}",
                qid=str(item.get("qid", f"q{i + 1}")),
                question=str(item["question"]),
                answer_a=answer_1 if p1_is_a else answer_2,
                answer_b=answer_2 if p1_is_a else answer_1,
                pipeline_a=pipeline_1 if p1_is_a else pipeline_2,
                pipeline_b=pipeline_2 if p1_is_a else pipeline_1,
                order_seed=order_seed,
            )
        )
    return Campaign(
        campaign_id=campaign_id, pipeline_1=pipeline_1, pipeline_2=pipeline_2, tasks=tasks
    )


def campaign_items_from_records(
    records: list[RunRecord],
    bench: BenchmarkSet,
    pipeline_1: str,
    pipeline_2: str,
    n: int,
    seed: int,
) -> list[dict]:
    """Draw a question sample and pair both pipelines' stored answers."""
    by_key = {(r.pipeline_id, r.qid): r for r in records if r.status == "ok"}
    items = []
    for item in sample(bench, n, seed):
        try:
            a1 = by_key[(pipeline_1, item.qid)]
            a2 = by_key[(pipeline_2, item.qid)]
        except KeyError as exc:
            raise ServiceError(f"no stored answer for {exc.args[0]}") from None
        items.append(
            {
                "qid": item.qid,
                "question": item.question,
                "answer_1": a1.answer_text,
                "answer_2": a2.answer_text,
            }
        )
    return items


@dataclass
class ServiceState:
    router: Router
    provider: ChatProvider
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    configs: list[PipelineConfig] = field(default_factory=enumerate_pipelines)
    default_pipeline_id: str = DEFAULT_PIPELINE_ID
    log_dir: Path | None = None
    campaign: Campaign | None = None
    votes: dict[tuple[str, str], Vote] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self) -> None:
        if self.default_pipeline_id not in {c.id for c in self.configs}:
            raise ServiceError(
                f"default pipeline {self.default_pipeline_id!r} not in the config grid"
            )
        if self.log_dir is not None:
            self.log_dir = Path(self.log_dir)
            self.log_dir.mkdir(parents=True, exist_ok=True)

    def log_event(self, event: dict) -> None:
        if self.log_dir is None:
            return
        day = datetime.now(timezone.utc).strftime("%Y-%m-%d")
        path = self.log_dir / f"sessions-{day}.jsonl"
        line = json.dumps(event, sort_keys=True) + "\n"
        with self.lock:
            with path.open("a", encoding="utf-8") as fh:
                fh.write(line)

    def load_campaign(self, campaign: Campaign) -> None:
        with self.lock:
            self.campaign = campaign
            self.votes = {}


class ChatBody(BaseModel):
    message: str = ""
    strategy: str | None = None
    model: str | None = None
    top_k: int | None = None


class RetrieveBody(BaseModel):
    query: str
    strategy: str
    k: int


class CampaignBody(BaseModel):
    campaign_id: str
    pipeline_1: str
    pipeline_2: str
    seed: int = 0
    items: list[dict]


class VoteBody(BaseModel):
    task_id: str
    grader_id: str
    choice: str


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def create_app(state: ServiceState, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="grounded machine-safety QA service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = state

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/configs")
    def configs() -> dict:
        return {
            "configs": [
                {
                    "id": c.id,
                    "strategy": c.strategy.value,
                    "model_id": c.model.model_id,
                    "top_k": c.top_k,
                    "default": c.id == state.default_pipeline_id,
                }
                for c in state.configs
            ],
            "default_id": state.default_pipeline_id,
        }

    @app.post("/chat")
    def chat(body: ChatBody) -> dict:
        if not body.message.strip():
            raise HTTPException(status_code=400, detail="message must be non-empty")
        default = parse_pipeline_id(state.default_pipeline_id)
        try:
            strategy = RetrievalStrategy(body.strategy) if body.strategy else default.strategy
            model = model_by_id(body.model) if body.model else default.model
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        top_k = body.top_k if body.top_k is not None else default.top_k
        if top_k < 0:
            raise HTTPException(status_code=400, detail="top_k must be >= 0")
        t0 = time.perf_counter()
        try:
            hits = state.router.retrieve(strategy, body.message, top_k)
        except RetrievalError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except TransportError as exc:
            raise HTTPException(
                status_code=503, detail=str(exc), headers={"Retry-After": "1"}
            ) from None
        retrieval_time = time.perf_counter() - t0
        blocks = [
            ContextBlock(
                chunk_id=h.chunk_id,
                doc_id=h.citation.doc_id,
                section_title=h.citation.section_title,
                page_start=h.citation.page_start,
                page_end=h.citation.page_end,
                text=state.router.chunk_text(h.chunk_id),
            )
            for h in hits
        ]
        request = GenerationRequest(
            model=model,
            system_prompt=state.system_prompt,
            user_content=assemble_prompt(body.message, blocks),
        )
        try:
            result = generate(request, state.provider)
        except TransportError as exc:
            raise HTTPException(
                status_code=503, detail=str(exc), headers={"Retry-After": "1"}
            ) from None
        cost = compute_cost(result.input_tokens, result.output_tokens, model)
        pipeline_id = PipelineConfig(strategy=strategy, model=model, top_k=top_k).id
        citations = [
            {
                "marker": i + 1,
                "chunk_id": b.chunk_id,
                "doc_id": b.doc_id,
                "section_title": b.section_title,
                "page_start": b.page_start,
                "page_end": b.page_end,
            }
            for i, b in enumerate(blocks)
        ]
        response = {
            "answer": result.text,
            "citations": citations,
            "usage": {
                "input_tokens": result.input_tokens,
                "output_tokens": result.output_tokens,
                "cost_usd": cost,
            },
            "latency": {
                "retrieval_time_s": retrieval_time,
                "generation_time_s": result.wall_time_s,
            },
            "pipeline": {
                "id": pipeline_id,
                "strategy": strategy.value,
                "model_id": model.model_id,
                "top_k": top_k,
            },
        }
        state.log_event(
            {
                "type": "chat",
                "timestamp": _utcnow(),
                "message": body.message,
                "pipeline_id": pipeline_id,
                "retrieved_chunk_ids": [h.chunk_id for h in hits],
                "answer": result.text,
                "usage": response["usage"],
                "latency": response["latency"],
            }
        )
        return response

    @app.post("/retrieve")
    def retrieve(body: RetrieveBody) -> dict:
        try:
            hits = state.router.retrieve(body.strategy, body.query, body.k)
        except RetrievalError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {
            "results": [
                {
                    "chunk_id": h.chunk_id,
                    "score": h.score,
                    "rank": h.rank,
                    "strategy": h.strategy.value,
                    "provider": h.provider,
                    "citation": {
                        "doc_id": h.citation.doc_id,
                        "section_title": h.citation.section_title,
                        "page_start": h.citation.page_start,
                        "page_end": h.citation.page_end,
                    },
                    "snippet": state.router.chunk_text(h.chunk_id)[:240],
                }
                for h in hits
            ]
        }

    @app.post("/compare/campaign")
    def load_campaign(body: CampaignBody) -> dict:
        try:
            campaign = build_campaign(
                body.campaign_id, body.pipeline_1, body.pipeline_2, body.items, body.seed
            )
        except (ServiceError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        state.load_campaign(campaign)
        return {"campaign_id": campaign.campaign_id, "task_count": len(campaign.tasks)}

    @app.get("/compare/next")
    def compare_next(grader_id: str) -> dict:
        if state.campaign is None:
            raise HTTPException(status_code=404, detail="no comparison campaign loaded")
        if not grader_id.strip():
            raise HTTPException(status_code=400, detail="grader_id must be non-empty")
        voted = {
            task_id for (task_id, gid) in state.votes if gid == grader_id
        }
        total = len(state.campaign.tasks)
        done = len(voted)
        for task in state.campaign.tasks:
            if task.task_id not in voted:
                return {
                    "task": {
                        "task_id": task.task_id,
                        "question": task.question,
                        "answer_a": task.answer_a,
                        "answer_b": task.answer_b,
                    },
                    "progress": {"done": done, "total": total},
                }
        return {"task": None, "progress": {"done": done, "total": total}}

    @app.post("/compare/vote")
    def compare_vote(body: VoteBody) -> dict:
        if state.campaign is None:
            raise HTTPException(status_code=404, detail="no comparison campaign loaded")
        if body.choice not in ("a", "b", "tie"):
            raise HTTPException(status_code=400, detail="choice must be a, b, or tie")
        if not body.grader_id.strip():
            raise HTTPException(status_code=400, detail="grader_id must be non-empty")
        if body.task_id not in {t.task_id for t in state.campaign.tasks}:
            raise HTTPException(status_code=404, detail=f"unknown task {body.task_id!r}")
        vote = Vote(
            task_id=body.task_id,
            grader_id=body.grader_id,
            choice=body.choice,
            timestamp=_utcnow(),
        )
        with state.lock:
            key = (body.task_id, body.grader_id)
            if key in state.votes:
                raise HTTPException(status_code=409, detail="grader already voted on this task")
            state.votes[key] = vote
        state.log_event(
            {
                "type": "vote",
                "timestamp": vote.timestamp,
                "campaign_id": state.campaign.campaign_id,
                "task_id": vote.task_id,
                "grader_id": vote.grader_id,
                "choice": vote.choice,
            }
        )
        return {"status": "recorded"}

    @app.get("/compare/results")
    def compare_results() -> dict:
        if state.campaign is None:
            raise HTTPException(status_code=404, detail="no comparison campaign loaded")
        campaign = state.campaign
        task_by_id = {t.task_id: t for t in campaign.tasks}
        wins = {campaign.pipeline_1: 0, campaign.pipeline_2: 0}
        ties = 0
        for vote in state.votes.values():
            task = task_by_id[vote.task_id]
            if vote.choice == "tie":
                ties += 1
            elif vote.choice == "a":
                wins[task.pipeline_a] += 1
            else:
                wins[task.pipeline_b] += 1
        total = len(state.votes)
        def proportion(count: int) -> float:
            return count / total if total else 0.0
        return {
            "campaign_id": campaign.campaign_id,
            "total_votes": total,
            "pipelines": [
                {
                    "pipeline_id": pid,
                    "wins": wins[pid],
                    "proportion": proportion(wins[pid]),
                }
                for pid in (campaign.pipeline_1, campaign.pipeline_2)
            ],
            "ties": {"count": ties, "proportion": proportion(ties)},
        }

    return app
