#!/usr/bin/env python3
"""Capture canned service responses for frontend development and tests.

Spins up the service in-process with the mock provider, exercises every
endpoint the browser client uses, and writes the JSON payloads to
frontend/fixtures/ (or --out). The frontend test suite replays these
instead of talking to a live service.
"""

import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient

from safetyrag.gateway import MockChatProvider
from safetyrag.ingest import ingest_documents, parse_source_documents
from safetyrag.retrieval import build_router
from safetyrag.service import ServiceState, create_app


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(ROOT / "frontend" / "fixtures"))
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    data = json.loads((ROOT / "data" / "sample_corpus.json").read_text(encoding="utf-8"))
    _, docs = parse_source_documents(data)
    router = build_router(ingest_documents(docs))
    state = ServiceState(router=router, provider=MockChatProvider())
    client = TestClient(create_app(state))

    fixtures = {}
    fixtures["configs"] = client.get("/configs").json()
    fixtures["chat"] = client.post(
        "/chat", json={"message": "How do I avoid pinch points when working near the robot?"}
    ).json()
    fixtures["chat_no_context"] = client.post(
        "/chat", json={"message": "zzz qqq xxyzzy", "strategy": "bm25", "top_k": 5}
    ).json()

    items = [
        {
            "qid": f"q{i}",
            "question": f"Sample comparison question {i}?",
            "answer_1": f"Answer from the first configuration for question {i}.",
            "answer_2": f"Answer from the second configuration for question {i}.",
        }
        for i in range(10)
    ]
    client.post(
        "/compare/campaign",
        json={
            "campaign_id": "fixture-campaign",
            "pipeline_1": "gpt-5-mini-2025-08-07_bm25_3",
            "pipeline_2": "gpt-5-nano-2025-08-07_vanilla_7",
            "seed": 11,
            "items": items,
        },
    )
    fixtures["compare_next"] = client.get(
        "/compare/next", params={"grader_id": "fixture-grader"}
    ).json()
    first_task = fixtures["compare_next"]["task"]["task_id"]
    fixtures["vote_ok"] = client.post(
        "/compare/vote",
        json={"task_id": first_task, "grader_id": "fixture-grader", "choice": "a"},
    ).json()
    fixtures["compare_results"] = client.get("/compare/results").json()

    for name, payload in fixtures.items():
        path = out / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
