"""LLM access: prompt templates, tag-grammar parsing, providers, accounting.

Two fixed prompt templates drive the engine. `index_build` asks the model to
pick topics from a candidate set and extract key phrases for one paper,
answering inside <top></top> and <kp></kp> tags; `core_concepts` asks it to
select, from candidate topic and key-term lists, the concepts that identify
a query's relevant papers, answering inside <ans></ans>. Providers are
interchangeable: a real OpenAI-compatible chat endpoint, a deterministic
replay store keyed by prompt hash, or a scripted rule for tests. The gateway
is policy-free: it renders, calls, parses and counts, and leaves validation
of the returned lists to its callers.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .corpus import canonicalize

INDEX_BUILD_TEMPLATE = """You will receive a paper abstract along with a set of candidate topics for the paper.

Your first task is to select the topics that best align with the core theme of the paper.
Exclude topics that are too broad or less relevant.

Only use the topic names in the candidate set.

Your second task is to generate a complete list of key phrases extracted from the paper.

Do some rationalization before outputting the list of relevant topics and key phrases.

Output format: `<top> topic 1, topic 2, ... </top>
<kp>key phrase 1, key phrase 2, ... </kp>'.

Paper: {d}"""

CORE_CONCEPTS_TEMPLATE = """You will receive a query for research papers and a ranked list of papers returned by a retriever.

You will also be provided a list of research topics and key terms with their frequencies that are frequently mentioned by the top-ranked papers returned by the retriever.

Your task is to improve the provided retrieval results by selecting a list of topics and terms that can accurately identify the relevant papers of the query.

Make sure your selection is strictly based on the original query and does not contain repeated concepts.

Output format: `<ans>selection 1, selection 2, ...</ans>'.

Retriever result: {d0}

Candidate topics: {t0}

Candidate key terms: {p0}

Original Query: {q}"""


class UnboundPlaceholderError(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"placeholder {{{name}}} is unbound")


class ParseFailure(ValueError):
    """The expected tag span is absent or unclosed; carries the raw text."""

    def __init__(self, tag: str, raw_text: str):
        self.tag = tag
        self.raw_text = raw_text
        super().__init__(f"no complete <{tag}>...</{tag}> span in response")


class TransportError(RuntimeError):
    def __init__(self, attempts: int, last_error: Exception):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"LLM request failed after {attempts} attempts: {last_error}")


class ReplayMiss(KeyError):
    def __init__(self, prompt_hash: str):
        self.prompt_hash = prompt_hash
        super().__init__(f"replay store has no response for prompt hash {prompt_hash}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str  # index_build | core_concepts
    text: str

    def placeholders(self) -> list[str]:
        import re

        return sorted(set(re.findall(r"\{([a-z0-9_]+)\}", self.text)))


TEMPLATES = {
    "index_build": PromptTemplate("index_build", INDEX_BUILD_TEMPLATE),
    "core_concepts": PromptTemplate("core_concepts", CORE_CONCEPTS_TEMPLATE),
}


def render_prompt(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute every placeholder exactly; unbound placeholders raise."""
    import re

    def sub(match):
        name = match.group(1)
        if name not in bindings:
            raise UnboundPlaceholderError(name)
        return bindings[name]

    return re.sub(r"\{([a-z0-9_]+)\}", sub, template.text)


def parse_tagged_list(text: str, tag: str) -> list[str]:
    """Canonicalized, deduplicated items from the first <tag>...</tag> span."""
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    start = text.find(open_tag)
    if start < 0:
        raise ParseFailure(tag, text)
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        raise ParseFailure(tag, text)
    span = text[start + len(open_tag) : end]
    out: list[str] = []
    seen: set[str] = set()
    for piece in span.split(","):
        item = canonicalize(piece)
        if item and item not in seen:
            seen.add(item)
            out.append(item)
    return out


@dataclass
class LlmResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_s: float
    approximate_counts: bool = False


class CallLedger:
    """Per-query counters, monotone during a query, reset between queries."""

    def __init__(self):
        self._lock = threading.Lock()
        self.llm_calls = 0
        self.retriever_calls = 0
        self.completion_tokens = 0
        self.wall_time_s = 0.0

    def count_llm_call(self, completion_tokens: int = 0) -> None:
        with self._lock:
            self.llm_calls += 1
            self.completion_tokens += completion_tokens

    def add_completion_tokens(self, n: int) -> None:
        with self._lock:
            self.completion_tokens += n

    def count_retriever_call(self) -> None:
        with self._lock:
            self.retriever_calls += 1

    def add_wall_time(self, seconds: float) -> None:
        with self._lock:
            self.wall_time_s += seconds

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "llm_calls": self.llm_calls,
                "retriever_calls": self.retriever_calls,
                "completion_tokens": self.completion_tokens,
                "wall_time_s": self.wall_time_s,
            }

    def reset(self) -> None:
        with self._lock:
            self.llm_calls = 0
            self.retriever_calls = 0
            self.completion_tokens = 0
            self.wall_time_s = 0.0


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def _approx_tokens(text: str) -> int:
    return len(text.split())


@dataclass
class ProviderResult:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


class HttpChatProvider:
    """OpenAI-compatible chat-completions client with bounded retries.

    Transient failures (connection errors, timeouts, HTTP 429/5xx) are
    retried up to `max_retries` times with exponential backoff, then raise
    TransportError. Decoding uses temperature 0.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_s: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_s = backoff_s

    def generate(self, prompt: str) -> ProviderResult:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        last_error: Exception | None = None
        attempts = 0
        for attempt in range(self.max_retries + 1):
            attempts = attempt + 1
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise requests.HTTPError(f"HTTP {resp.status_code}", response=resp)
                resp.raise_for_status()
                body = resp.json()
                usage = body.get("usage") or {}
                return ProviderResult(
                    text=body["choices"][0]["message"]["content"],
                    prompt_tokens=usage.get("prompt_tokens"),
                    completion_tokens=usage.get("completion_tokens"),
                )
            except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as exc:
                status = getattr(getattr(exc, "response", None), "status_code", None)
                transient = status is None or status == 429 or status >= 500
                if not transient:
                    raise
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff_s * (2**attempt))
        raise TransportError(attempts, last_error)


class ReplayProvider:
    """Answers from a recorded (prompt-hash, response) store; fully offline."""

    def __init__(self, store_path: str | Path):
        self.store_path = Path(store_path)
        self.responses: dict[str, str] = {}
        if self.store_path.exists():
            with open(self.store_path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self.responses[rec["prompt_sha256"]] = rec["response"]

    def generate(self, prompt: str) -> ProviderResult:
        key = prompt_hash(prompt)
        if key not in self.responses:
            raise ReplayMiss(key)
        return ProviderResult(text=self.responses[key])


class MockProvider:
    """Runs a user-supplied deterministic prompt -> text rule."""

    def __init__(self, rule):
        self.rule = rule

    def generate(self, prompt: str) -> ProviderResult:
        return ProviderResult(text=self.rule(prompt))


class RecordingProvider:
    """Wraps a provider and appends (prompt-hash, response) replay records."""

    def __init__(self, inner, store_path: str | Path):
        self.inner = inner
        self.store_path = Path(store_path)

    def generate(self, prompt: str) -> ProviderResult:
        result = self.inner.generate(prompt)
        with open(self.store_path, "a", encoding="utf-8") as f:
            f.write(json.dumps({"prompt_sha256": prompt_hash(prompt), "response": result.text}) + "\n")
        return result


def complete(provider, prompt: str, ledger: CallLedger | None = None) -> LlmResponse:
    """One provider call: ledger counts it whether or not it succeeds."""
    if ledger is not None:
        ledger.count_llm_call()
    started = time.perf_counter()
    result = provider.generate(prompt)
    latency = time.perf_counter() - started
    approximate = result.prompt_tokens is None or result.completion_tokens is None
    prompt_tokens = result.prompt_tokens if result.prompt_tokens is not None else _approx_tokens(prompt)
    completion_tokens = (
        result.completion_tokens if result.completion_tokens is not None else _approx_tokens(result.text)
    )
    if ledger is not None:
        ledger.add_completion_tokens(completion_tokens)
    return LlmResponse(
        text=result.text,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        latency_s=latency,
        approximate_counts=approximate,
    )
