"""Answer judging and accuracy aggregation.

Two judges share one verdict schema: an LLM judge driven by a pinned
rubric prompt (live use), and a deterministic normalized-equality judge
(hermetic tests and CI). Cells whose judge output cannot be parsed are
recorded as unjudged and excluded from accuracy denominators; coercing
them either way would bias pipeline comparisons.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .benchmark import BenchmarkSet
from .experiment import RunRecord, parse_pipeline_id
from .gateway import ChatProvider, GenerationRequest, GenerationResult, ModelSpec, model_by_id

VERDICTS_SCHEMA_VERSION = 1

JUDGE_SYSTEM_PROMPT = "You are a strict grader of machine-safety answers."

DEFAULT_JUDGE_PROMPT = """You are grading a question-answering system for machine-safety documentation.
Decide whether the candidate answer conveys the same essential content as the
reference answer. Equivalent wording counts as correct; missing or wrong
safety-critical content counts as incorrect.

Question:
{question}

Reference answer:
{gold_answer}

Candidate answer:
{generated_answer}

Reply with exactly one word on the first line: CORRECT or INCORRECT.
You may add a brief justification on the following lines.
"""


class EvaluationError(ValueError):
    """Invalid evaluation inputs (empty verdict set, unknown grouping)."""


class JudgeParseError(ValueError):
    """Judge reply did not contain a recognizable verdict."""


@dataclass
class JudgeVerdict:
    pipeline_id: str
    qid: str
    correct: bool
    judge_model: str
    rationale: str
    judge_prompt_sha256: str = ""


@dataclass
class UnjudgedCell:
    pipeline_id: str
    qid: str
    reason: str


@dataclass
class EvaluationResult:
    verdicts: list[JudgeVerdict]
    unjudged: list[UnjudgedCell] = field(default_factory=list)


_WS = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    return _WS.sub(" ", text.lower()).strip().rstrip(".?!").rstrip()


def judge_exact(gold_answer: str, generated_answer: str) -> bool:
    """Deterministic judge: equality after lowercasing, whitespace
    collapsing, and terminal-punctuation stripping."""
    return normalize_answer(gold_answer) == normalize_answer(generated_answer)


def judge_prompt_hash(template: str = DEFAULT_JUDGE_PROMPT) -> str:
    return hashlib.sha256(template.encode()).hexdigest()


def build_judge_prompt(
    question: str,
    gold_answer: str,
    generated_answer: str,
    template: str = DEFAULT_JUDGE_PROMPT,
) -> str:
    return template.format(
        question=question, gold_answer=gold_answer, generated_answer=generated_answer
    )


def parse_judge_reply(text: str) -> tuple[bool, str]:
    """The rubric constrains the reply to CORRECT/INCORRECT on line one;
    anything else is a parse failure, never coerced to a verdict."""
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines:
        raise JudgeParseError("empty judge reply")
    first = lines[0].strip().strip(".:").upper()
    if first == "CORRECT":
        return True, "\n".join(lines[1:])
    if first == "INCORRECT":
        return False, "\n".join(lines[1:])
    raise JudgeParseError(f"unrecognized judge verdict line {lines[0]!r}")


def judge_llm(
    question: str,
    gold_answer: str,
    generated_answer: str,
    judge_provider: ChatProvider,
    judge_model: ModelSpec,
    pipeline_id: str = "",
    qid: str = "",
    template: str = DEFAULT_JUDGE_PROMPT,
    retries: int = 2,
) -> JudgeVerdict:
    """One judged cell via the LLM judge. Empty candidate answers are
    incorrect by definition and never reach the provider."""
    if not generated_answer.strip():
        return JudgeVerdict(
            pipeline_id=pipeline_id,
            qid=qid,
            correct=False,
            judge_model=judge_model.model_id,
            rationale="empty candidate answer",
            judge_prompt_sha256=judge_prompt_hash(template),
        )
    request = GenerationRequest(
        model=judge_model,
        system_prompt=JUDGE_SYSTEM_PROMPT,
        user_content=build_judge_prompt(question, gold_answer, generated_answer, template),
        max_output_tokens=200,
    )
    last_error: Exception | None = None
    for _ in range(retries + 1):
        try:
            reply = judge_provider.chat(request)
            correct, rationale = parse_judge_reply(reply.text)
            return JudgeVerdict(
                pipeline_id=pipeline_id,
                qid=qid,
                correct=correct,
                judge_model=judge_model.model_id,
                rationale=rationale,
                judge_prompt_sha256=judge_prompt_hash(template),
            )
        except (JudgeParseError, RuntimeError) as exc:
            last_error = exc
    raise JudgeParseError(f"judge failed after {retries + 1} attempts: {last_error}")


class MockJudgeProvider:
    """Offline judge provider: recovers the reference and candidate answers
    from the rubric prompt and verdicts by normalized equality, so the full
    judge_llm path (prompt build, provider call, reply parse) is exercised
    without a network."""

    REFERENCE_MARKER = "Reference answer:\n"
    CANDIDATE_MARKER = "Candidate answer:\n"
    REPLY_MARKER = "\n\nReply with"

    def chat(self, request: GenerationRequest) -> GenerationResult:
        content = request.user_content
        try:
            after_ref = content.split(self.REFERENCE_MARKER, 1)[1]
            gold = after_ref.split("\n\n" + self.CANDIDATE_MARKER, 1)[0]
            candidate = content.split(self.CANDIDATE_MARKER, 1)[1].split(self.REPLY_MARKER, 1)[0]
        except IndexError:
            reply = "UNKNOWN"
        else:
            if judge_exact(gold, candidate):
                reply = "CORRECT\nMatches the reference after normalization."
            else:
                reply = "INCORRECT\nDiffers from the reference after normalization."
        return GenerationResult(
            text=reply,
            input_tokens=len(request.user_content.split()),
            output_tokens=len(reply.split()),
            wall_time_s=0.0,
        )


def evaluate_records(
    records: list[RunRecord],
    bench: BenchmarkSet,
    judge: str = "exact",
    judge_provider: ChatProvider | None = None,
    judge_model_id: str = "gpt-5-mini-2025-08-07",
    template: str = DEFAULT_JUDGE_PROMPT,
) -> EvaluationResult:
    """Judge every ok-status record against its gold answer.

    judge: "exact" uses the deterministic judge; "mock" routes the rubric
    prompt through MockJudgeProvider; "llm" requires judge_provider.
    Error-status records and judge failures land in `unjudged`.
    """
    if judge not in ("exact", "mock", "llm"):
        raise EvaluationError(f"unknown judge {judge!r}")
    if judge == "llm" and judge_provider is None:
        raise EvaluationError("llm judge needs a judge_provider")
    if judge == "mock":
        judge_provider = MockJudgeProvider()
    by_qid = bench.by_qid()
    prompt_hash = judge_prompt_hash(template)
    verdicts: list[JudgeVerdict] = []
    unjudged: list[UnjudgedCell] = []
    seen: set[tuple[str, str]] = set()
    for r in records:
        key = (r.pipeline_id, r.qid)
        if key in seen:
            raise EvaluationError(f"duplicate (pipeline, qid) cell {key} in evaluation pass")
        seen.add(key)
        if r.qid not in by_qid:
            raise EvaluationError(f"record qid {r.qid!r} not in benchmark")
        if r.status != "ok":
            unjudged.append(UnjudgedCell(r.pipeline_id, r.qid, f"run error: {r.error}"))
            continue
        item = by_qid[r.qid]
        if judge == "exact":
            verdicts.append(
                JudgeVerdict(
                    pipeline_id=r.pipeline_id,
                    qid=r.qid,
                    correct=judge_exact(item.gold_answer, r.answer_text),
                    judge_model="exact",
                    rationale="normalized string equality",
                    judge_prompt_sha256=prompt_hash,
                )
            )
            continue
        try:
            verdicts.append(
                judge_llm(
                    item.question,
                    item.gold_answer,
                    r.answer_text,
                    judge_provider,
                    model_by_id(judge_model_id),
                    pipeline_id=r.pipeline_id,
                    qid=r.qid,
                    template=template,
                )
            )
        except JudgeParseError as exc:
            unjudged.append(UnjudgedCell(r.pipeline_id, r.qid, str(exc)))
    return EvaluationResult(verdicts=verdicts, unjudged=unjudged)


@dataclass
class AccuracyRow:
    n_correct: int
    n_total: int

    @property
    def proportion(self) -> float:
        return self.n_correct / self.n_total


@dataclass
class AccuracyTable:
    group_by: str
    rows: dict[str, AccuracyRow]

    @property
    def total(self) -> AccuracyRow:
        return AccuracyRow(
            n_correct=sum(r.n_correct for r in self.rows.values()),
            n_total=sum(r.n_total for r in self.rows.values()),
        )


GROUPERS = {
    "pipeline_id": lambda v: v.pipeline_id,
    "model": lambda v: parse_pipeline_id(v.pipeline_id).model.model_id,
    "strategy": lambda v: parse_pipeline_id(v.pipeline_id).strategy.value,
    "top_k": lambda v: str(parse_pipeline_id(v.pipeline_id).top_k),
    "overall": lambda v: "overall",
}


def aggregate_accuracy(verdicts: list[JudgeVerdict], group_by: str = "pipeline_id") -> AccuracyTable:
    """Exact integer counting of correct verdicts per group."""
    if not verdicts:
        raise EvaluationError("no verdicts to aggregate")
    try:
        grouper = GROUPERS[group_by]
    except KeyError:
        raise EvaluationError(f"unknown group_by {group_by!r}") from None
    rows: dict[str, AccuracyRow] = {}
    for v in verdicts:
        key = grouper(v)
        row = rows.setdefault(key, AccuracyRow(0, 0))
        row.n_total += 1
        row.n_correct += int(v.correct)
    return AccuracyTable(group_by=group_by, rows=dict(sorted(rows.items())))


def format_accuracy(table: AccuracyTable) -> str:
    width = max(len(k) for k in table.rows)
    lines = [f"accuracy by {table.group_by}"]
    for key, row in table.rows.items():
        lines.append(f"  {key:<{width}}  {row.n_correct:>4}/{row.n_total:<4}  {row.proportion:.4f}")
    return "\n".join(lines)


def verdict_to_dict(v: JudgeVerdict) -> dict:
    return {
        "pipeline_id": v.pipeline_id,
        "qid": v.qid,
        "correct": v.correct,
        "judge_model": v.judge_model,
        "rationale": v.rationale,
        "judge_prompt_sha256": v.judge_prompt_sha256,
    }


def verdict_from_dict(data: dict) -> JudgeVerdict:
    return JudgeVerdict(
        pipeline_id=data["pipeline_id"],
        qid=data["qid"],
        correct=bool(data["correct"]),
        judge_model=data["judge_model"],
        rationale=data.get("rationale", ""),
        judge_prompt_sha256=data.get("judge_prompt_sha256", ""),
    )


def save_verdicts(result: EvaluationResult, path: str | Path) -> None:
    lines = [json.dumps(verdict_to_dict(v), sort_keys=True) for v in result.verdicts]
    lines += [
        json.dumps(
            {"pipeline_id": u.pipeline_id, "qid": u.qid, "unjudged": True, "reason": u.reason},
            sort_keys=True,
        )
        for u in result.unjudged
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_verdicts(path: str | Path) -> EvaluationResult:
    verdicts: list[JudgeVerdict] = []
    unjudged: list[UnjudgedCell] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        if data.get("unjudged"):
            unjudged.append(UnjudgedCell(data["pipeline_id"], data["qid"], data.get("reason", "")))
        else:
            verdicts.append(verdict_from_dict(data))
    return EvaluationResult(verdicts=verdicts, unjudged=unjudged)
