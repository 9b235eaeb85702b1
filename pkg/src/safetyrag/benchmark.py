"""Gold-standard question/answer benchmark: schema, validation, sampling.

The on-disk format is JSONL, one item per line, so expert review cycles
diff cleanly. Every item carries the machine it concerns, a difficulty
label, and at least one source reference grounding the gold answer.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class BenchmarkError(ValueError):
    """Schema violation in a benchmark file or an invalid sample request."""


class Machine(str, Enum):
    UR5E_COBOT = "ur5e_cobot"
    TL1_LATHE = "tl1_lathe"
    BRIDGEPORT_MILL = "bridgeport_mill"


class Difficulty(str, Enum):
    EASY = "easy"
    COMPLEX = "complex"


@dataclass(frozen=True)
class SourceRef:
    doc_id: str
    section_title: str


@dataclass
class BenchmarkItem:
    qid: str
    machine: Machine
    difficulty: Difficulty
    question: str
    gold_answer: str
    source_refs: list[SourceRef] = field(default_factory=list)

    def validate(self) -> None:
        if not self.qid:
            raise BenchmarkError("item has empty qid")
        if not self.question.strip():
            raise BenchmarkError(f"item {self.qid!r}: question is empty")
        if not self.gold_answer.strip():
            raise BenchmarkError(f"item {self.qid!r}: gold_answer is empty")
        if not self.source_refs:
            raise BenchmarkError(f"item {self.qid!r}: needs at least one source_ref")


@dataclass
class BenchmarkSet:
    items: list[BenchmarkItem]

    @property
    def machine_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for item in self.items:
            counts[item.machine.value] = counts.get(item.machine.value, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.items)

    def by_qid(self) -> dict[str, BenchmarkItem]:
        return {item.qid: item for item in self.items}

    def validate(self) -> None:
        if not self.items:
            raise BenchmarkError("benchmark has no items")
        seen: set[str] = set()
        for item in self.items:
            item.validate()
            if item.qid in seen:
                raise BenchmarkError(f"duplicate qid {item.qid!r}")
            seen.add(item.qid)


def item_from_dict(data: dict) -> BenchmarkItem:
    try:
        item = BenchmarkItem(
            qid=str(data["qid"]),
            machine=Machine(data["machine"]),
            difficulty=Difficulty(data["difficulty"]),
            question=str(data["question"]),
            gold_answer=str(data["gold_answer"]),
            source_refs=[
                SourceRef(doc_id=str(r["doc_id"]), section_title=str(r["section_title"]))
                for r in data.get("source_refs", [])
            ],
        )
    except BenchmarkError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        qid = data.get("qid", "<missing qid>")
        raise BenchmarkError(f"malformed benchmark item {qid!r}: {exc}") from exc
    item.validate()
    return item


def item_to_dict(item: BenchmarkItem) -> dict:
    return {
        "qid": item.qid,
        "machine": item.machine.value,
        "difficulty": item.difficulty.value,
        "question": item.question,
        "gold_answer": item.gold_answer,
        "source_refs": [
            {"doc_id": r.doc_id, "section_title": r.section_title} for r in item.source_refs
        ],
    }


def load_benchmark(path: str | Path) -> BenchmarkSet:
    text = Path(path).read_text(encoding="utf-8")
    items: list[BenchmarkItem] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BenchmarkError(f"{path}: line {lineno} is not valid JSON: {exc}") from exc
        item = item_from_dict(data)
        item.validate()
        items.append(item)
    bench = BenchmarkSet(items=items)
    bench.validate()
    return bench


def serialize_benchmark(bench: BenchmarkSet) -> str:
    return "".join(json.dumps(item_to_dict(i), sort_keys=True) + "\n" for i in bench.items)


def save_benchmark(bench: BenchmarkSet, path: str | Path) -> None:
    Path(path).write_text(serialize_benchmark(bench), encoding="utf-8")


def sample(bench: BenchmarkSet, n: int, seed: int) -> list[BenchmarkItem]:
    """Uniform sample without replacement, deterministic per seed."""
    if n < 0:
        raise BenchmarkError("sample size must be >= 0")
    if n > len(bench.items):
        raise BenchmarkError(f"sample size {n} exceeds benchmark size {len(bench.items)}")
    return random.Random(seed).sample(bench.items, n)
