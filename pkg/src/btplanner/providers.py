"""Uniform access to external model services: chat completion, sentence
embedding, and image-based condition judgment.

Each service has a live HTTP implementation, a deterministic replay
implementation backed by a transcript file, and a recording wrapper that
delegates to a live provider while appending transcript records. A hashed
bag-of-words fallback embedder enables fully offline similarity runs; it is
deterministic and deliberately simple, not a stand-in for a real sentence
encoder's quality.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np


class TransportError(Exception):
    pass


class RateLimited(TransportError):
    pass


class ReplayMiss(Exception):
    """Request absent from the transcript: the fixture has drifted."""


class DimensionDrift(Exception):
    pass


class VerdictUnparseable(Exception):
    pass


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    temperature: float = 0.0
    max_output: int = 4096


@dataclass(frozen=True)
class ChatResponse:
    text: str
    provider: str = ""
    latency_s: float = 0.0


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)


class ChatProvider(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


class EmbeddingProvider(Protocol):
    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


class VlmProvider(Protocol):
    def judge(
        self, condition_text: str, before: str | None, after: str | None
    ) -> tuple[bool, str]: ...


# ---------------------------------------------------------------------------
# Request hashing and transcripts

def request_hash(kind: str, body: dict) -> str:
    canonical = json.dumps({"kind": kind, "body": body}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _chat_body(request: ChatRequest) -> dict:
    return {
        "prompt": request.prompt,
        "temperature": request.temperature,
        "max_output": request.max_output,
    }


class Transcript:
    """Append-only line-delimited record file keyed by request hash."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def load(self) -> dict[str, dict]:
        records: dict[str, dict] = {}
        if not self.path.exists():
            return records
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                key = record["request_hash"]
                if key in records and records[key]["response"] != record["response"]:
                    raise ValueError(f"hash collision in transcript {self.path}: {key}")
                records[key] = record
        return records

    def append(self, kind: str, body: dict, response: dict) -> None:
        record = {
            "kind": kind,
            "request_hash": request_hash(kind, body),
            "request": body,
            "response": response,
            "timestamp": time.time(),
        }
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Chat providers

class LiveChatProvider:
    """Chat-completion over HTTPS in the de-facto standard request shape.

    Endpoint and credential come from the environment (BTPLANNER_CHAT_URL,
    BTPLANNER_API_KEY); every call carries a timeout.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout_s: float = 60.0,
        max_retries: int = 2,
    ) -> None:
        self.endpoint = endpoint or os.environ.get("BTPLANNER_CHAT_URL", "")
        self.api_key = api_key or os.environ.get("BTPLANNER_API_KEY", "")
        self.model = model or os.environ.get("BTPLANNER_CHAT_MODEL", "")
        self.timeout_s = float(os.environ.get("BTPLANNER_TIMEOUT_S", timeout_s))
        self.max_retries = max_retries

    def complete(self, request: ChatRequest) -> ChatResponse:
        import httpx

        if not self.endpoint:
            raise TransportError("no chat endpoint configured (BTPLANNER_CHAT_URL)")
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            start = time.monotonic()
            try:
                resp = httpx.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout_s
                )
            except httpx.HTTPError as exc:
                last = exc
                continue
            if resp.status_code == 429:
                last = RateLimited(resp.text)
                time.sleep(min(2.0 * (attempt + 1), 10.0))
                continue
            if resp.status_code >= 400:
                raise TransportError(f"chat endpoint returned {resp.status_code}: {resp.text}")
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
            return ChatResponse(
                text=text, provider="live", latency_s=time.monotonic() - start
            )
        if isinstance(last, RateLimited):
            raise last
        raise TransportError(f"chat request failed after retries: {last}")


class ReplayChatProvider:
    def __init__(self, transcript: Transcript) -> None:
        self._records = transcript.load()

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request_hash("chat", _chat_body(request))
        record = self._records.get(key)
        if record is None:
            raise ReplayMiss(f"no chat record for hash {key}")
        return ChatResponse(text=record["response"]["text"], provider="replay")


class RecordingChatProvider:
    def __init__(self, inner: ChatProvider, transcript: Transcript) -> None:
        self.inner = inner
        self.transcript = transcript

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.transcript.append("chat", _chat_body(request), {"text": response.text})
        return response


class ScriptedChatProvider:
    """Answers from a prompt -> text mapping or a callable; for tests and
    fixture construction."""

    def __init__(self, script) -> None:
        self.script = script
        self.calls: list[ChatRequest] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls.append(request)
        if callable(self.script):
            text = self.script(request)
        else:
            if request.prompt not in self.script:
                raise TransportError("scripted provider has no response for prompt")
            text = self.script[request.prompt]
        return ChatResponse(text=text, provider="scripted")


# ---------------------------------------------------------------------------
# Embedding providers

FALLBACK_EMBEDDING_DIM = 256


class HashedBagOfWordsEmbedder:
    """Deterministic offline embedder: lowercase, split on non-alphanumerics,
    hash each token into a fixed number of buckets, count, L2-normalize."""

    def __init__(self, dim: int = FALLBACK_EMBEDDING_DIM) -> None:
        self.dim = dim

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be nonempty")
        out = []
        for text in texts:
            vec = np.zeros(self.dim)
            for token in _tokenize(text):
                digest = hashlib.sha1(token.encode("utf-8")).digest()
                vec[int.from_bytes(digest[:4], "big") % self.dim] += 1.0
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out.append(EmbeddingVector(tuple(float(v) for v in vec)))
        return out


def _tokenize(text: str) -> list[str]:
    tokens, current = [], []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


class ReplayEmbeddingProvider:
    def __init__(self, transcript: Transcript) -> None:
        self._records = transcript.load()

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        key = request_hash("embed", {"texts": list(texts)})
        record = self._records.get(key)
        if record is None:
            raise ReplayMiss(f"no embed record for hash {key}")
        return [EmbeddingVector(tuple(v)) for v in record["response"]["vectors"]]


class RecordingEmbeddingProvider:
    def __init__(self, inner: EmbeddingProvider, transcript: Transcript) -> None:
        self.inner = inner
        self.transcript = transcript

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        vectors = self.inner.embed_texts(texts)
        dims = {v.dim for v in vectors}
        if len(dims) > 1:
            raise DimensionDrift(f"provider returned mixed dims {sorted(dims)}")
        self.transcript.append(
            "embed",
            {"texts": list(texts)},
            {"vectors": [list(v.values) for v in vectors]},
        )
        return vectors


# ---------------------------------------------------------------------------
# VLM judgment

VLM_JUDGMENT_TEMPLATE = (
    "Given the before/after images, has the following condition been "
    "achieved? Answer yes or no.\nCondition: {condition}"
)


def parse_verdict(raw: str) -> bool:
    """Parse a leading yes/no token case-insensitively."""
    token = raw.strip().split(None, 1)[0].rstrip(".,!:;") if raw.strip() else ""
    low = token.lower()
    if low == "yes":
        return True
    if low == "no":
        return False
    raise VerdictUnparseable(f"no leading yes/no in {raw!r}")


def _vlm_body(condition_text: str, before: str | None, after: str | None) -> dict:
    return {"condition": condition_text, "before": before, "after": after}


class LiveVlmProvider:
    """Sends the judgment template plus image references (file path or
    base64 payload) to a chat-style endpoint and parses the verdict."""

    def __init__(self, chat: ChatProvider) -> None:
        self.chat = chat

    def judge(
        self, condition_text: str, before: str | None, after: str | None
    ) -> tuple[bool, str]:
        prompt = VLM_JUDGMENT_TEMPLATE.format(condition=condition_text)
        if before:
            prompt += f"\n[before image: {before}]"
        if after:
            prompt += f"\n[after image: {after}]"
        raw = self.chat.complete(ChatRequest(prompt=prompt)).text
        return parse_verdict(raw), raw


class ReplayVlmProvider:
    def __init__(self, transcript: Transcript) -> None:
        self._records = transcript.load()

    def judge(
        self, condition_text: str, before: str | None, after: str | None
    ) -> tuple[bool, str]:
        key = request_hash("vlm", _vlm_body(condition_text, before, after))
        record = self._records.get(key)
        if record is None:
            raise ReplayMiss(f"no vlm record for hash {key}")
        return record["response"]["verdict"], record["response"]["raw"]


class RecordingVlmProvider:
    def __init__(self, inner: VlmProvider, transcript: Transcript) -> None:
        self.inner = inner
        self.transcript = transcript

    def judge(
        self, condition_text: str, before: str | None, after: str | None
    ) -> tuple[bool, str]:
        verdict, raw = self.inner.judge(condition_text, before, after)
        self.transcript.append(
            "vlm",
            _vlm_body(condition_text, before, after),
            {"verdict": verdict, "raw": raw},
        )
        return verdict, raw


@dataclass
class ScriptedVlmProvider:
    verdicts: dict[str, bool] = field(default_factory=dict)

    def judge(
        self, condition_text: str, before: str | None, after: str | None
    ) -> tuple[bool, str]:
        verdict = self.verdicts.get(condition_text, False)
        return verdict, "yes" if verdict else "no"
