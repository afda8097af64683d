"""Zero/few-shot prompt construction, demonstrator sampling, and response
parsing for in-context-learning classification.

Prompts combine a task instruction demanding a Yes/No answer, k rendered
demonstrators, and the query as a trailing incomplete example. Responses are
lowercased and mapped onto positive/negative; anything else is counted as
unparseable and treated as negative at aggregation, never as positive.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from webtopic.chunker import Chunk
from webtopic.errors import InputError, TransportError
from webtopic.scoring import Backend, backend_generate

SAMPLING_MODES = ("random", "balanced", "knn")

# Artifact-authored default template; override through PromptConfig.template.
DEFAULT_TEMPLATE = "{instruction}\n\n{demonstrators}{input}"

DEFAULT_INSTRUCTION = (
    "You will be shown text from a webpage. Decide whether the text is about "
    "the following topic: {topic}. Answer only with 'Yes' or 'No'."
)

_EXAMPLE_INPUT = "Text: {text}\n"
_EXAMPLE_ANSWER = "Answer: {answer}\n\n"
_QUERY_SUFFIX = "Text: {text}\nAnswer:"

ANSWER_WORDS = {"positive": "Yes", "negative": "No"}


@dataclass
class PromptConfig:
    topic_description: str
    k_demonstrators: int = 4
    sampling: str = "random"
    seed: int = 0
    template: str = DEFAULT_TEMPLATE

    def __post_init__(self) -> None:
        if self.k_demonstrators < 0:
            raise InputError("k_demonstrators must be >= 0")
        if self.sampling not in SAMPLING_MODES:
            raise InputError(f"sampling must be one of {SAMPLING_MODES}")
        for placeholder in ("{instruction}", "{demonstrators}", "{input}"):
            if placeholder not in self.template:
                raise InputError(f"template is missing {placeholder}")


@dataclass
class GenerationParams:
    temperature: float = 0.3
    top_k: int = 50
    top_p: float = 0.95

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise InputError("temperature must be > 0")
        if self.top_k < 1:
            raise InputError("top_k must be >= 1")
        if not 0 < self.top_p <= 1:
            raise InputError("top_p must be in (0, 1]")


@dataclass
class ParsedAnswer:
    value: str  # positive | negative | unparseable
    raw: str


EmbedFn = Callable[[Sequence[str]], Sequence[Sequence[float]]]


def _query_rng(cfg: PromptConfig, query_text: str) -> random.Random:
    # Stable per-(seed, query) stream so reruns and parallel order do not
    # change which demonstrators a query gets.
    digest = hashlib.sha256(f"{cfg.seed}|{query_text}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def cosine_distance(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0 or nb == 0:
        return 1.0
    return 1.0 - dot / (na * nb)


def sample_demonstrators(
    train: Sequence[Chunk],
    query: Chunk | str,
    cfg: PromptConfig,
    embed: EmbedFn | None = None,
) -> list[Chunk]:
    """Pick k demonstrators: uniform, class-balanced, or nearest-neighbor.

    balanced draws ceil(k/2) positives and floor(k/2) negatives and shuffles
    the order; knn ranks by ascending cosine distance of embeddings with
    ties kept in input order.
    """
    k = cfg.k_demonstrators
    if k == 0:
        return []
    if k > len(train):
        raise InputError(f"k={k} exceeds {len(train)} training chunks")
    query_text = query.text if isinstance(query, Chunk) else query

    if cfg.sampling == "random":
        rng = _query_rng(cfg, query_text)
        return rng.sample(list(train), k)

    if cfg.sampling == "balanced":
        pos = [c for c in train if c.label == "positive"]
        neg = [c for c in train if c.label == "negative"]
        n_pos = math.ceil(k / 2)
        n_neg = k // 2
        if len(pos) < n_pos or len(neg) < n_neg:
            raise InputError(
                f"balanced sampling needs {n_pos} positive and {n_neg} negative "
                f"chunks, have {len(pos)}/{len(neg)}"
            )
        rng = _query_rng(cfg, query_text)
        picked = rng.sample(pos, n_pos) + rng.sample(neg, n_neg)
        rng.shuffle(picked)
        return picked

    if embed is None:
        raise InputError("knn sampling requires an embed function")
    vectors = embed([query_text] + [c.text for c in train])
    qv = vectors[0]
    ranked = sorted(
        range(len(train)), key=lambda i: (cosine_distance(qv, vectors[i + 1]), i)
    )
    return [train[i] for i in ranked[:k]]


def render_demonstrator(chunk: Chunk) -> str:
    return _EXAMPLE_INPUT.format(text=chunk.text) + _EXAMPLE_ANSWER.format(
        answer=ANSWER_WORDS[chunk.label]
    )


def build_prompt(query_text: str, demonstrators: Sequence[Chunk], cfg: PromptConfig) -> str:
    """Render the full prompt; deterministic for fixed inputs."""
    instruction = DEFAULT_INSTRUCTION.format(topic=cfg.topic_description)
    demos = "".join(render_demonstrator(c) for c in demonstrators)
    try:
        return cfg.template.format(
            instruction=instruction,
            demonstrators=demos,
            input=_QUERY_SUFFIX.format(text=query_text),
        )
    except (KeyError, IndexError) as exc:
        raise InputError(f"bad prompt template: {exc}") from exc


_ALPHA_TOKEN = re.compile(r"[^\W\d_]+", re.UNICODE)


def parse_answer(raw: str) -> ParsedAnswer:
    """Map a model response onto positive/negative via its first word.

    The response is lowercased and the first alphabetic token compared to
    yes/no; anything else is unparseable (a value, not an error).
    """
    match = _ALPHA_TOKEN.search(raw.lower())
    token = match.group(0) if match else ""
    if token == "yes":
        return ParsedAnswer(value="positive", raw=raw)
    if token == "no":
        return ParsedAnswer(value="negative", raw=raw)
    return ParsedAnswer(value="unparseable", raw=raw)


@dataclass
class IclDocumentResult:
    page_id: str
    predicted: str
    chunk_values: list[str]  # positive | negative | unparseable | failed
    n_unparseable: int
    n_failed: int


@dataclass
class IclRunResult:
    documents: list[IclDocumentResult]
    n_unparseable: int
    n_failed: int


def classify_chunk(
    chunk_text: str,
    train: Sequence[Chunk],
    cfg: PromptConfig,
    gen: GenerationParams,
    backend: Backend,
    embed: EmbedFn | None = None,
    max_retries: int = 2,
) -> str:
    """One chunk through sample -> prompt -> generate -> parse.

    Transport errors are retried up to max_retries, then reported as
    "failed" for the chunk rather than aborting the run.
    """
    demos = sample_demonstrators(train, chunk_text, cfg, embed=embed)
    prompt = build_prompt(chunk_text, demos, cfg)
    attempt = 0
    while True:
        try:
            raw = backend_generate(
                prompt, backend, temperature=gen.temperature,
                top_k=gen.top_k, top_p=gen.top_p,
            )
            return parse_answer(raw).value
        except TransportError:
            attempt += 1
            if attempt > max_retries:
                return "failed"


def run_icl(
    eval_chunks: Sequence[Chunk],
    train: Sequence[Chunk],
    cfg: PromptConfig,
    gen: GenerationParams,
    backend: Backend,
    embed: EmbedFn | None = None,
    max_retries: int = 2,
) -> IclRunResult:
    """Classify documents by prompting the backend once per chunk.

    Document labels use the same OR aggregation as supervised scoring: a
    page is positive iff any chunk parses to positive. Unparseable and
    failed chunks count as negative and are tallied separately.
    """
    by_page: dict[str, list[Chunk]] = {}
    for chunk in eval_chunks:
        by_page.setdefault(chunk.page_id, []).append(chunk)

    documents: list[IclDocumentResult] = []
    total_unparseable = 0
    total_failed = 0
    for page_id, chunks in by_page.items():
        values = [
            classify_chunk(
                c.text, train, cfg, gen, backend, embed=embed, max_retries=max_retries
            )
            for c in sorted(chunks, key=lambda c: c.index)
        ]
        n_unp = sum(1 for v in values if v == "unparseable")
        n_fail = sum(1 for v in values if v == "failed")
        total_unparseable += n_unp
        total_failed += n_fail
        predicted = "positive" if any(v == "positive" for v in values) else "negative"
        documents.append(
            IclDocumentResult(
                page_id=page_id,
                predicted=predicted,
                chunk_values=values,
                n_unparseable=n_unp,
                n_failed=n_fail,
            )
        )
    return IclRunResult(
        documents=documents, n_unparseable=total_unparseable, n_failed=total_failed
    )
