"""Classical baselines: linear SVM over TF-IDF features and a character
n-gram URL classifier with linear interpolation and backoff (LIB).

The SVM is trained in the primal with seeded stochastic subgradient descent
(step size 1/(lambda*t)), which is plenty at corpus scale and keeps the
model a plain weight vector. LIB scores a URL's feature text per character
as an interpolated mixture of n-gram conditionals with backoff on unseen
contexts and an add-one floor at order 1.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from webtopic.errors import InputError

SparseVec = dict[int, float]

BEGIN = "\x02"
END = "\x03"


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    lambda_: float
    epochs: int
    seed: int

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])


def _label_sign(label: str) -> int:
    return 1 if label == "positive" else -1


def svm_train(
    examples: Sequence[tuple[SparseVec, str]],
    dim: int,
    lambda_: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
) -> SvmModel:
    """Minimize hinge loss with L2 penalty by Pegasos-style SGD."""
    if not examples:
        raise InputError("no training examples")
    labels = {label for _, label in examples}
    if labels != {"positive", "negative"}:
        raise InputError("need at least one example of each class")
    for vec, _ in examples:
        for col in vec:
            if not 0 <= col < dim:
                raise InputError(f"feature index {col} outside [0, {dim})")

    # Bias as an always-on regularized feature: the 1/t shrinkage then
    # telescopes over it like any weight, keeping early huge steps bounded.
    # The late iterates still oscillate on noisy data, so the returned model
    # is the end-of-epoch iterate with the lowest primal objective (the
    # zero start included), which also makes the objective check monotone.
    w = np.zeros(dim)
    b = 0.0
    rng = random.Random(seed)
    order = list(range(len(examples)))

    def objective(weights: np.ndarray, bias: float) -> float:
        hinge = sum(
            max(0.0, 1.0 - _label_sign(lab) * (sum(weights[c] * v for c, v in vec.items()) + bias))
            for vec, lab in examples
        )
        return 0.5 * lambda_ * float(weights @ weights) + hinge / len(examples)

    best_w, best_b = w.copy(), b
    best_obj = objective(w, b)
    t = 0
    for _ in range(epochs):
        rng.shuffle(order)
        for idx in order:
            t += 1
            eta = 1.0 / (lambda_ * t)
            vec, label = examples[idx]
            y = _label_sign(label)
            margin = y * (sum(w[c] * v for c, v in vec.items()) + b)
            shrink = 1.0 - eta * lambda_
            w *= shrink
            b *= shrink
            if margin < 1.0:
                for c, v in vec.items():
                    w[c] += eta * y * v
                b += eta * y
        obj = objective(w, b)
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
    return SvmModel(weights=best_w, bias=best_b, lambda_=lambda_, epochs=epochs, seed=seed)


def svm_score(model: SvmModel, vec: SparseVec) -> float:
    """Signed margin w.v + b."""
    for col in vec:
        if not 0 <= col < model.dim:
            raise InputError(f"feature index {col} outside [0, {model.dim})")
    return float(sum(model.weights[c] * v for c, v in vec.items()) + model.bias)


def svm_predict(model: SvmModel, vec: SparseVec) -> str:
    return "positive" if svm_score(model, vec) >= 0 else "negative"


def svm_objective(
    model: SvmModel, examples: Sequence[tuple[SparseVec, str]]
) -> float:
    """Regularized empirical hinge loss, for monitoring convergence."""
    hinge = 0.0
    for vec, label in examples:
        margin = _label_sign(label) * svm_score(model, vec)
        hinge += max(0.0, 1.0 - margin)
    reg = 0.5 * model.lambda_ * float(model.weights @ model.weights)
    return reg + hinge / len(examples)


def svm_to_dict(model: SvmModel) -> dict:
    return {
        "format": "webtopic-svm",
        "version": 1,
        "weights": [float(x) for x in model.weights],
        "bias": model.bias,
        "lambda": model.lambda_,
        "epochs": model.epochs,
        "seed": model.seed,
    }


def svm_from_dict(data: dict) -> SvmModel:
    if data.get("format") != "webtopic-svm" or data.get("version") != 1:
        raise InputError("not a version-1 svm model file")
    return SvmModel(
        weights=np.array(data["weights"], dtype=float),
        bias=float(data["bias"]),
        lambda_=float(data["lambda"]),
        epochs=int(data["epochs"]),
        seed=int(data["seed"]),
    )


@dataclass
class LibModel:
    """Per-class character n-gram counts with interpolation weights.

    counts[label][n] maps an n-character gram to its count; context_totals
    holds the matching denominators (sum over continuations of a context).
    """

    order: int
    interpolation_weights: list[float]
    counts: dict[str, list[dict[str, int]]]
    context_totals: dict[str, list[dict[str, int]]]
    vocab_size: int
    char_totals: dict[str, int]

    def __post_init__(self) -> None:
        s = sum(self.interpolation_weights)
        if any(w < 0 for w in self.interpolation_weights) or abs(s - 1.0) > 1e-9:
            raise InputError("interpolation weights must be nonnegative and sum to 1")


def _padded(text: str, order: int) -> str:
    return BEGIN * (order - 1) + text + END


def lib_train(
    urls: Sequence[tuple[str, str]],
    order: int = 4,
    interpolation_weights: list[float] | None = None,
) -> LibModel:
    """Count per-class character n-grams (orders 1..order) over URL feature
    text padded with begin/end sentinels."""
    if order < 1:
        raise InputError("order must be >= 1")
    labels = {label for _, label in urls}
    if labels != {"positive", "negative"}:
        raise InputError("need at least one URL of each class")
    if interpolation_weights is None:
        interpolation_weights = [1.0 / order] * order
    if len(interpolation_weights) != order:
        raise InputError("need one interpolation weight per order")

    counts = {lab: [dict() for _ in range(order + 1)] for lab in ("positive", "negative")}
    ctx_totals = {lab: [dict() for _ in range(order + 1)] for lab in ("positive", "negative")}
    vocab: set[str] = set()
    char_totals = {"positive": 0, "negative": 0}
    for text, label in urls:
        padded = _padded(text, order)
        vocab.update(padded)
        for n in range(1, order + 1):
            table = counts[label][n]
            totals = ctx_totals[label][n]
            for i in range(len(padded) - n + 1):
                gram = padded[i : i + n]
                table[gram] = table.get(gram, 0) + 1
                ctx = gram[:-1]
                totals[ctx] = totals.get(ctx, 0) + 1
        char_totals[label] += len(padded)

    return LibModel(
        order=order,
        interpolation_weights=list(interpolation_weights),
        counts=counts,
        context_totals=ctx_totals,
        vocab_size=len(vocab),
        char_totals=char_totals,
    )


def _position_prob(model: LibModel, label: str, context: str, char: str) -> float:
    """Interpolated probability of char after context, with backoff.

    The order-i estimate is count(ctx+char)/total(ctx); an unseen context
    backs off to order i-1; order 1 is add-one smoothed over the observed
    character vocabulary so the result is always positive.
    """
    add_one = (model.counts[label][1].get(char, 0) + 1) / (
        model.char_totals[label] + model.vocab_size
    )
    per_order = [add_one]
    for n in range(2, model.order + 1):
        ctx = context[-(n - 1) :] if n > 1 else ""
        total = model.context_totals[label][n].get(ctx, 0)
        if total == 0:
            per_order.append(per_order[-1])  # back off to the previous order
        else:
            per_order.append(model.counts[label][n].get(ctx + char, 0) / total)
    return sum(w * p for w, p in zip(model.interpolation_weights, per_order))


def lib_score(model: LibModel, url_feature_text: str) -> dict[str, float]:
    """Per-class log-likelihood of the feature text, character by character."""
    out: dict[str, float] = {}
    padded = BEGIN * (model.order - 1) + url_feature_text
    for label in ("positive", "negative"):
        ll = 0.0
        for i, char in enumerate(url_feature_text):
            context = padded[i : i + model.order - 1]
            ll += math.log(_position_prob(model, label, context, char))
        out[label] = ll
    return out


def lib_predict(model: LibModel, url_feature_text: str) -> str:
    scores = lib_score(model, url_feature_text)
    if scores["positive"] > scores["negative"]:
        return "positive"
    return "negative"  # ties go negative


def lib_to_dict(model: LibModel) -> dict:
    return {
        "format": "webtopic-lib",
        "version": 1,
        "order": model.order,
        "interpolation_weights": model.interpolation_weights,
        "counts": {lab: tables[1:] for lab, tables in model.counts.items()},
        "context_totals": {lab: tables[1:] for lab, tables in model.context_totals.items()},
        "vocab_size": model.vocab_size,
        "char_totals": model.char_totals,
    }


def lib_from_dict(data: dict) -> LibModel:
    if data.get("format") != "webtopic-lib" or data.get("version") != 1:
        raise InputError("not a version-1 lib model file")
    order = int(data["order"])
    return LibModel(
        order=order,
        interpolation_weights=[float(w) for w in data["interpolation_weights"]],
        counts={lab: [{}] + tables for lab, tables in data["counts"].items()},
        context_totals={
            lab: [{}] + tables for lab, tables in data["context_totals"].items()
        },
        vocab_size=int(data["vocab_size"]),
        char_totals={k: int(v) for k, v in data["char_totals"].items()},
    )
