"""Model gateway: prompt assembly, chat providers, token and cost accounting.

Every answer must come from the supplied context blocks, so the prompt
builder numbers each block and instructs the model to cite by number.
Costs are computed from per-million-token rates pinned per model.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Protocol

from .httpclient import post_json

LLM_URL_ENV = "SAFETYRAG_LLM_BASE_URL"
LLM_KEY_ENV = "SAFETYRAG_LLM_API_KEY"

DEFAULT_MAX_OUTPUT_TOKENS = 5000
DEFAULT_REASONING_EFFORT = "low"

DEFAULT_SYSTEM_PROMPT = (
    "You are a machine-safety assistant for manufacturing equipment. "
    "Answer strictly from the numbered context excerpts provided. "
    "Cite each claim with the bracketed excerpt number, like [2]. "
    "If the excerpts do not contain the answer, say you cannot find it "
    "in the provided material and do not guess."
)

NO_CONTEXT_NOTICE = (
    "No reference excerpts were retrieved for this question. State that you "
    "cannot answer from the available material."
)


class GatewayError(ValueError):
    """Invalid generation request or malformed provider response."""


@dataclass(frozen=True)
class ModelSpec:
    """A chat model plus its posted per-million-token prices (USD)."""

    model_id: str
    input_rate: float   # $ per 1M input tokens
    output_rate: float  # $ per 1M output tokens


GPT5_MINI = ModelSpec("gpt-5-mini-2025-08-07", input_rate=0.25, output_rate=2.00)
GPT5_NANO = ModelSpec("gpt-5-nano-2025-08-07", input_rate=0.050, output_rate=0.400)
KNOWN_MODELS = {m.model_id: m for m in (GPT5_MINI, GPT5_NANO)}


def model_by_id(model_id: str) -> ModelSpec:
    try:
        return KNOWN_MODELS[model_id]
    except KeyError:
        raise GatewayError(f"unknown model {model_id!r}") from None


@dataclass(frozen=True)
class ContextBlock:
    """One retrieved excerpt, with enough metadata to render its citation."""

    chunk_id: str
    doc_id: str
    section_title: str
    page_start: int
    page_end: int
    text: str


@dataclass
class GenerationRequest:
    model: ModelSpec
    system_prompt: str
    user_content: str
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    reasoning_effort: str = DEFAULT_REASONING_EFFORT
    temperature: float = 0.0

    def validate(self) -> None:
        if not self.user_content.strip():
            raise GatewayError("user content must be non-empty")
        if self.max_output_tokens < 1:
            raise GatewayError("max_output_tokens must be >= 1")
        if self.temperature < 0.0:
            raise GatewayError("temperature must be >= 0")


@dataclass
class GenerationResult:
    text: str
    input_tokens: int
    output_tokens: int
    wall_time_s: float
    provider_request_id: str | None = None


def format_citation(block: ContextBlock) -> str:
    pages = (
        f"p. {block.page_start}"
        if block.page_start == block.page_end
        else f"pp. {block.page_start}-{block.page_end}"
    )
    return f"{block.doc_id}, {block.section_title}, {pages}"


def assemble_prompt(question: str, contexts: list[ContextBlock]) -> str:
    """Numbered excerpts, then the question; the numbering is the citation
    key the system prompt tells the model to use."""
    if not question.strip():
        raise GatewayError("question must be non-empty")
    lines: list[str] = []
    if contexts:
        lines.append("Context excerpts:")
        for i, block in enumerate(contexts, start=1):
            lines.append("")
            lines.append(f"[{i}] {format_citation(block)}")
            lines.append(block.text)
    else:
        lines.append(NO_CONTEXT_NOTICE)
    lines.append("")
    lines.append(f"Question: {question}")
    lines.append("Answer using only the excerpts above, citing by number.")
    return "\n".join(lines)


def compute_cost(input_tokens: int, output_tokens: int, model: ModelSpec) -> float:
    """USD cost of one call: tokens * per-million rate, summed over
    directions. Exact in float because the acceptance tolerances demand it."""
    if input_tokens < 0 or output_tokens < 0:
        raise GatewayError("token counts must be >= 0")
    return input_tokens * model.input_rate / 1e6 + output_tokens * model.output_rate / 1e6


class ChatProvider(Protocol):
    def chat(self, request: GenerationRequest) -> GenerationResult: ...


@dataclass
class MockChatProvider:
    """Deterministic offline provider for experiments and tests.

    Replies by echoing the first context excerpt (or a fixed refusal when
    none was supplied), so the reply is a pure function of the prompt.
    Token counts are whitespace word counts, which keeps cost accounting
    meaningful without a real tokenizer.
    """

    delay_s: float = 0.0
    calls: int = 0

    def chat(self, request: GenerationRequest) -> GenerationResult:
        self.calls += 1
        if self.delay_s:
            time.sleep(self.delay_s)
        reply = self._reply_for(request.user_content)
        input_tokens = len(request.system_prompt.split()) + len(request.user_content.split())
        return GenerationResult(
            text=reply,
            input_tokens=input_tokens,
            output_tokens=len(reply.split()),
            wall_time_s=0.0,  # caller overwrites with its own wall clock
            provider_request_id=f"mock-{self.calls}",
        )

    @staticmethod
    def _reply_for(user_content: str) -> str:
        lines = user_content.splitlines()
        for i, line in enumerate(lines):
            if line.startswith("[1] "):
                body: list[str] = []
                for follow in lines[i + 1:]:
                    if follow.startswith("[") or follow.startswith("Question:"):
                        break
                    if follow.strip():
                        body.append(follow.strip())
                if body:
                    return "According to [1], " + " ".join(body)
        return "I cannot find this in the provided material."


class HttpChatProvider:
    """Chat-completions contract: POST {base}/chat/completions with model,
    messages, max_tokens, temperature, reasoning_effort; usage block in the
    response carries the token counts."""

    def __init__(self, base_url: str, api_key: str | None = None, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout

    def chat(self, request: GenerationRequest) -> GenerationResult:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        payload = {
            "model": request.model.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_content},
            ],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
            "reasoning_effort": request.reasoning_effort,
        }
        data = post_json(
            f"{self.base_url}/chat/completions", payload, headers=headers, timeout=self.timeout
        )
        try:
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage", {})
            return GenerationResult(
                text=text,
                input_tokens=int(usage.get("prompt_tokens", 0)),
                output_tokens=int(usage.get("completion_tokens", 0)),
                wall_time_s=0.0,
                provider_request_id=data.get("id"),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat response: {exc}") from exc


def chat_provider_from_env() -> ChatProvider:
    """HTTP provider when SAFETYRAG_LLM_BASE_URL is set, mock otherwise."""
    url = os.environ.get(LLM_URL_ENV)
    if not url:
        return MockChatProvider()
    return HttpChatProvider(url, api_key=os.environ.get(LLM_KEY_ENV))


def generate(request: GenerationRequest, provider: ChatProvider) -> GenerationResult:
    """Validate, call the provider, and stamp the measured wall time."""
    request.validate()
    start = time.perf_counter()
    result = provider.chat(request)
    result.wall_time_s = time.perf_counter() - start
    return result
