"""Backend wire-protocol client and chunk-to-document score aggregation.

The backend protocol is newline-delimited JSON: requests are one object per
line {"id": int, "op": str, ...}, responses {"id": int, "ok": bool, ...}.
Two transports speak it bit-identically: a spawned child process over stdio,
and HTTP POST /v1/{op} with the same JSON bodies. Supported ops: train,
score, embed, generate, info.

A document is positive iff at least one of its chunks scores at or above the
threshold, which equals thresholding the max chunk score.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from typing import Sequence

import requests as _requests

from webtopic.errors import BackendError, InputError, ProtocolError, TransportError

FEATURE_MODES = ("url_only", "url_and_content")


@dataclass
class TrainConfig:
    learning_rate: float = 2e-5
    max_epochs: int = 3
    warmup_steps: int = 500
    weight_decay: float = 0.01
    max_seq_tokens: int = 512
    feature_mode: str = "url_and_content"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise InputError("max_epochs must be >= 1")
        if self.warmup_steps < 0:
            raise InputError("warmup_steps must be >= 0")
        if self.weight_decay < 0:
            raise InputError("weight_decay must be >= 0")
        if self.max_seq_tokens < 1:
            raise InputError("max_seq_tokens must be >= 1")
        if self.feature_mode not in FEATURE_MODES:
            raise InputError(f"feature_mode must be one of {FEATURE_MODES}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "warmup_steps": self.warmup_steps,
            "weight_decay": self.weight_decay,
            "max_seq_tokens": self.max_seq_tokens,
            "feature_mode": self.feature_mode,
        }


class Backend:
    """Transport-agnostic request/response against a protocol backend."""

    def request(self, op: str, payload: dict) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _check(self, sent_id: int, reply: dict) -> dict:
        if not isinstance(reply, dict) or "id" not in reply or "ok" not in reply:
            raise ProtocolError(f"malformed backend reply: {reply!r}")
        if reply["id"] != sent_id:
            raise ProtocolError(f"reply id {reply['id']} != request id {sent_id}")
        if not reply["ok"]:
            raise BackendError(str(reply.get("error", "backend reported failure")))
        return reply


class StdioBackend(Backend):
    """Spawns a backend as a child process and frames requests over stdio."""

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        try:
            self.proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot spawn backend {self.argv!r}: {exc}") from exc
        self._next_id = 0

    def request(self, op: str, payload: dict) -> dict:
        self._next_id += 1
        req_id = self._next_id
        message = {"id": req_id, "op": op, **payload}
        if self.proc.poll() is not None:
            raise TransportError("backend process has exited")
        try:
            self.proc.stdin.write(json.dumps(message) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"backend pipe failed: {exc}") from exc
        if not line:
            raise TransportError("backend closed the connection")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"backend sent non-JSON line: {line!r}") from exc
        return self._check(req_id, reply)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class HttpBackend(Backend):
    """POSTs each request to {base_url}/v1/{op} with the same JSON body."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._next_id = 0
        self._session = _requests.Session()

    def request(self, op: str, payload: dict) -> dict:
        self._next_id += 1
        req_id = self._next_id
        message = {"id": req_id, "op": op, **payload}
        try:
            resp = self._session.post(
                f"{self.base_url}/v1/{op}", json=message, timeout=self.timeout
            )
        except _requests.RequestException as exc:
            raise TransportError(f"backend unreachable: {exc}") from exc
        try:
            reply = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"backend sent non-JSON body: {resp.text!r}") from exc
        return self._check(req_id, reply)

    def close(self) -> None:
        self._session.close()


def open_backend(endpoint: str | Sequence[str]) -> Backend:
    """Connect to an endpoint: an http(s) URL, or a command line to spawn."""
    if isinstance(endpoint, str) and endpoint.startswith(("http://", "https://")):
        return HttpBackend(endpoint)
    argv = shlex.split(endpoint) if isinstance(endpoint, str) else list(endpoint)
    if not argv:
        raise InputError("empty backend endpoint")
    return StdioBackend(argv)


def backend_info(backend: Backend) -> dict:
    return backend.request("info", {})


def backend_train(
    examples: Sequence[tuple[str, str]], cfg: TrainConfig, backend: Backend
) -> str:
    """Send labeled texts and the training config verbatim; returns the
    backend's opaque model id."""
    if not examples:
        raise InputError("no training examples")
    reply = backend.request(
        "train",
        {
            "config": cfg.to_dict(),
            "examples": [{"text": t, "label": lab} for t, lab in examples],
        },
    )
    model_id = reply.get("model_id")
    if not isinstance(model_id, str):
        raise ProtocolError("train reply lacks a model_id string")
    return model_id


def backend_score(
    model_id: str, texts: Sequence[str], backend: Backend, batch_size: int = 64
) -> list[float]:
    """Positive-class probability per text, order preserved across batches."""
    if batch_size < 1:
        raise InputError("batch_size must be >= 1")
    scores: list[float] = []
    for start in range(0, len(texts), batch_size):
        batch = list(texts[start : start + batch_size])
        reply = backend.request("score", {"model_id": model_id, "texts": batch})
        got = reply.get("scores")
        if not isinstance(got, list) or len(got) != len(batch):
            raise ProtocolError(
                f"score reply has {len(got) if isinstance(got, list) else 'no'} "
                f"scores for {len(batch)} texts"
            )
        scores.extend(float(s) for s in got)
    return scores


def backend_embed(
    texts: Sequence[str], backend: Backend, batch_size: int = 64
) -> list[list[float]]:
    """Dense embedding per text; dimensionality fixed by the backend."""
    if batch_size < 1:
        raise InputError("batch_size must be >= 1")
    vectors: list[list[float]] = []
    for start in range(0, len(texts), batch_size):
        batch = list(texts[start : start + batch_size])
        reply = backend.request("embed", {"texts": batch})
        got = reply.get("vectors")
        if not isinstance(got, list) or len(got) != len(batch):
            raise ProtocolError(
                f"embed reply has {len(got) if isinstance(got, list) else 'no'} "
                f"vectors for {len(batch)} texts"
            )
        vectors.extend([float(x) for x in v] for v in got)
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise ProtocolError(f"embedding dimensionality not fixed: {sorted(dims)}")
    return vectors


def backend_generate(
    prompt: str,
    backend: Backend,
    temperature: float = 0.3,
    top_k: int = 50,
    top_p: float = 0.95,
) -> str:
    reply = backend.request(
        "generate",
        {"prompt": prompt, "temperature": temperature, "top_k": top_k, "top_p": top_p},
    )
    text = reply.get("text")
    if not isinstance(text, str):
        raise ProtocolError("generate reply lacks a text string")
    return text


@dataclass
class ScoredDocument:
    page_id: str
    chunk_scores: list[float]
    doc_score: float
    predicted: str
    threshold: float
    no_content: bool = False


def aggregate_document(
    chunk_scores: Sequence[float], threshold: float = 0.5, page_id: str = ""
) -> ScoredDocument:
    """Max-pool chunk scores into a document decision.

    Positive iff any chunk score >= threshold, which is exactly
    max(chunk_scores) >= threshold. An empty score list means the page had
    no scorable content: negative with doc_score 0 and no_content set.
    """
    if not 0 < threshold < 1:
        raise InputError("threshold must be in (0, 1)")
    scores = [float(s) for s in chunk_scores]
    for s in scores:
        if not 0.0 <= s <= 1.0:
            raise InputError(f"chunk score {s} outside [0, 1]")
    if not scores:
        return ScoredDocument(
            page_id=page_id,
            chunk_scores=[],
            doc_score=0.0,
            predicted="negative",
            threshold=threshold,
            no_content=True,
        )
    doc_score = max(scores)
    return ScoredDocument(
        page_id=page_id,
        chunk_scores=scores,
        doc_score=doc_score,
        predicted="positive" if doc_score >= threshold else "negative",
        threshold=threshold,
    )
