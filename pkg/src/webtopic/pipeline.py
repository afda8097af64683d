"""Feature assembly and end-to-end classification flows.

Glue between the data model and the classifiers: builds training examples
for each feature mode, trains/loads baseline models, and produces per-page
prediction records with chunk scores and the aggregated document label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from webtopic import baselines
from webtopic.chunker import Chunk
from webtopic.corpus import WebPage
from webtopic.errors import CorpusError, InputError
from webtopic.sampling import TfidfVectorizer
from webtopic.scoring import Backend, ScoredDocument, aggregate_document, backend_score
from webtopic.urltools import parse_url, url_feature_text


def page_url_text(page: WebPage) -> str:
    return url_feature_text(parse_url(page.url))


def combined_text(page: WebPage, chunk: Chunk) -> str:
    return f"{page_url_text(page)} {chunk.text}"


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-min(x, 500.0)))
    return 1.0 - 1.0 / (1.0 + math.exp(max(x, -500.0)))


@dataclass
class Prediction:
    page_id: str
    topic: str
    split: str
    gold: str
    predicted: str
    doc_score: float
    chunk_scores: list[float]
    no_content: bool = False
    n_unparseable: int = 0

    def to_record(self) -> dict:
        return {
            "page_id": self.page_id, "topic": self.topic, "split": self.split,
            "gold": self.gold, "predicted": self.predicted,
            "doc_score": self.doc_score, "chunk_scores": self.chunk_scores,
            "no_content": self.no_content, "n_unparseable": self.n_unparseable,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Prediction":
        return cls(**rec)


def save_predictions(preds: Sequence[Prediction], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            fh.write(json.dumps(p.to_record(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def load_predictions(path) -> list[Prediction]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Prediction.from_record(json.loads(line)))
            except (json.JSONDecodeError, TypeError, KeyError) as exc:
                raise CorpusError(f"line {lineno}: bad prediction record ({exc})") from exc
    return out


def training_texts(
    pages: Sequence[WebPage],
    chunks_by_page: dict[str, list[Chunk]],
    feature_mode: str,
) -> list[tuple[str, str]]:
    """(text, label) training pairs for the given feature mode.

    url_only yields one pair per page; url_and_content yields one pair per
    chunk with the URL feature text prefixed, so URL signal reaches every
    chunk example.
    """
    pairs: list[tuple[str, str]] = []
    for page in pages:
        if feature_mode == "url_only":
            pairs.append((page_url_text(page), page.label))
        elif feature_mode == "url_and_content":
            for chunk in chunks_by_page.get(page.id, []):
                pairs.append((combined_text(page, chunk), chunk.label))
        else:
            raise InputError(f"bad feature_mode {feature_mode!r}")
    return pairs


@dataclass
class SvmBundle:
    """A trained SVM plus the vectorizer that feeds it."""

    tfidf: TfidfVectorizer
    model: baselines.SvmModel
    feature_mode: str

    def to_dict(self) -> dict:
        return {
            "format": "webtopic-svm-bundle",
            "version": 1,
            "feature_mode": self.feature_mode,
            "tfidf": self.tfidf.to_dict(),
            "svm": baselines.svm_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SvmBundle":
        if data.get("format") != "webtopic-svm-bundle" or data.get("version") != 1:
            raise InputError("not a version-1 svm bundle file")
        return cls(
            tfidf=TfidfVectorizer.from_dict(data["tfidf"]),
            model=baselines.svm_from_dict(data["svm"]),
            feature_mode=data["feature_mode"],
        )


def train_svm_bundle(
    train_pages: Sequence[WebPage],
    chunks_by_page: dict[str, list[Chunk]],
    feature_mode: str,
    tfidf_dim: int = 10_000,
    lambda_: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
) -> SvmBundle:
    pairs = training_texts(train_pages, chunks_by_page, feature_mode)
    if not pairs:
        raise InputError("no training examples (are chunks missing?)")
    tfidf = TfidfVectorizer(max_terms=tfidf_dim).fit(t for t, _ in pairs)
    examples = [(tfidf.transform(t), lab) for t, lab in pairs]
    model = baselines.svm_train(
        examples, dim=tfidf.dim, lambda_=lambda_, epochs=epochs, seed=seed
    )
    return SvmBundle(tfidf=tfidf, model=model, feature_mode=feature_mode)


def classify_with_svm(
    bundle: SvmBundle,
    pages: Sequence[WebPage],
    chunks_by_page: dict[str, list[Chunk]],
    split_of: dict[str, str],
    threshold: float = 0.5,
) -> list[Prediction]:
    preds = []
    for page in pages:
        if bundle.feature_mode == "url_only":
            texts = [page_url_text(page)]
        else:
            texts = [combined_text(page, c) for c in chunks_by_page.get(page.id, [])]
        scores = [
            sigmoid(baselines.svm_score(bundle.model, bundle.tfidf.transform(t)))
            for t in texts
        ]
        doc = aggregate_document(scores, threshold=threshold, page_id=page.id)
        preds.append(_prediction_from_doc(page, split_of, doc))
    return preds


def train_lib_model(
    train_pages: Sequence[WebPage], order: int = 4
) -> baselines.LibModel:
    pairs = [(page_url_text(p), p.label) for p in train_pages]
    return baselines.lib_train(pairs, order=order)


def classify_with_lib(
    model: baselines.LibModel,
    pages: Sequence[WebPage],
    split_of: dict[str, str],
    threshold: float = 0.5,
) -> list[Prediction]:
    preds = []
    for page in pages:
        ll = baselines.lib_score(model, page_url_text(page))
        score = sigmoid(ll["positive"] - ll["negative"])
        doc = aggregate_document([score], threshold=threshold, page_id=page.id)
        preds.append(_prediction_from_doc(page, split_of, doc))
    return preds


def classify_with_backend(
    model_id: str,
    backend: Backend,
    pages: Sequence[WebPage],
    chunks_by_page: dict[str, list[Chunk]],
    split_of: dict[str, str],
    feature_mode: str = "url_and_content",
    threshold: float = 0.5,
    batch_size: int = 64,
) -> list[Prediction]:
    """Score every chunk through the backend, then aggregate per page."""
    texts: list[str] = []
    owners: list[tuple[str, int]] = []  # (page_id, position)
    for page in pages:
        if feature_mode == "url_only":
            texts.append(page_url_text(page))
            owners.append((page.id, 0))
        else:
            for i, chunk in enumerate(chunks_by_page.get(page.id, [])):
                texts.append(combined_text(page, chunk))
                owners.append((page.id, i))
    scores = backend_score(model_id, texts, backend, batch_size=batch_size)
    by_page: dict[str, list[float]] = {page.id: [] for page in pages}
    for (page_id, _), score in zip(owners, scores):
        by_page[page_id].append(score)
    preds = []
    for page in pages:
        doc = aggregate_document(by_page[page.id], threshold=threshold, page_id=page.id)
        preds.append(_prediction_from_doc(page, split_of, doc))
    return preds


def _prediction_from_doc(
    page: WebPage, split_of: dict[str, str], doc: ScoredDocument
) -> Prediction:
    return Prediction(
        page_id=page.id,
        topic=page.topic,
        split=split_of.get(page.id, ""),
        gold=page.label,
        predicted=doc.predicted,
        doc_score=doc.doc_score,
        chunk_scores=doc.chunk_scores,
        no_content=doc.no_content,
    )
