import http.server
import json
import pathlib
import threading

import pytest

from safetyrag import benchmark, ingest, retrieval

ROOT = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def corpus_chunks():
    data = json.loads((ROOT / "data" / "sample_corpus.json").read_text(encoding="utf-8"))
    _, docs = ingest.parse_source_documents(data)
    return ingest.ingest_documents(docs)


@pytest.fixture(scope="session")
def router(corpus_chunks):
    # stateless over immutable indices, so one per session is safe
    return retrieval.build_router(corpus_chunks)


@pytest.fixture(scope="session")
def mini_bench():
    return benchmark.load_benchmark(ROOT / "data" / "benchmark_mini.jsonl")


class ScriptedServer:
    """Tiny JSON HTTP server: each POST consumes the next scripted
    (status, body) pair and records the request for assertions."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []
        outer = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length) if length else b"{}"
                outer.requests.append(
                    {
                        "path": self.path,
                        "payload": json.loads(body or b"{}"),
                        "headers": dict(self.headers),
                    }
                )
                status, reply = (
                    outer.responses.pop(0) if outer.responses else (500, {"error": "exhausted"})
                )
                data = reply.encode() if isinstance(reply, str) else json.dumps(reply).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *_args):
                pass

        self.server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def scripted_server():
    servers = []

    def make(responses):
        server = ScriptedServer(responses)
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.close()


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {outcome}")
