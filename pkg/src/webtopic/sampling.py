"""Train/test split construction and negative-sampling strategies.

Splits follow the 90/10 positive allocation with balanced negatives in train
and test; leftover high-confidence negatives form the unbalanced (unbl) set
and low-confidence pages the extended (extd) set. Negative samplers: uniform
random, domain-stratified with an "others" stratum, and cluster-based over a
TF-IDF -> PCA -> DBSCAN pipeline.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from webtopic.corpus import WebPage
from webtopic.errors import CorpusError, InputError
from webtopic.urltools import parse_url

SPLIT_NAMES = ("train", "test", "unbl", "extd")


@dataclass
class SplitSpec:
    train_pos_fraction: float = 0.9
    seed: int = 0
    augmented_to_train_only: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.train_pos_fraction < 1:
            raise InputError("train_pos_fraction must be in (0, 1)")


@dataclass
class DatasetSplit:
    name: str
    page_ids: list[str]
    n_pos: int
    n_neg: int


def make_split(name: str, pages: list[WebPage]) -> DatasetSplit:
    n_pos = sum(1 for p in pages if p.label == "positive")
    return DatasetSplit(
        name=name,
        page_ids=[p.id for p in pages],
        n_pos=n_pos,
        n_neg=len(pages) - n_pos,
    )


def build_splits(corpus: Sequence[WebPage], spec: SplitSpec) -> dict[str, DatasetSplit]:
    """Partition a corpus into train/test/unbl/extd splits.

    Positives with high-confidence labels are split train_pos_fraction /
    rest by a seeded shuffle; augmented positives are forced into train.
    Train and test each receive as many negatives as they hold positives
    (balanced); remaining high-confidence negatives go to unbl and all
    low-confidence pages to extd.
    """
    low = [p for p in corpus if p.confidence == "low"]
    high = [p for p in corpus if p.confidence == "high"]
    positives = [p for p in high if p.label == "positive"]
    negatives = [p for p in high if p.label == "negative"]
    if not positives:
        raise InputError("no high-confidence positive pages in corpus")

    rng = random.Random(spec.seed)
    if spec.augmented_to_train_only:
        forced = [p for p in positives if p.source == "augmented"]
        splittable = [p for p in positives if p.source != "augmented"]
    else:
        forced = []
        splittable = list(positives)

    n_train_pos = math.floor(spec.train_pos_fraction * len(positives))
    n_test_pos = len(positives) - n_train_pos
    if n_test_pos > len(splittable):
        raise InputError(
            f"need {n_test_pos} non-augmented positives for the test split, "
            f"have {len(splittable)}"
        )
    shuffled = list(splittable)
    rng.shuffle(shuffled)
    test_pos = shuffled[:n_test_pos]
    train_pos = forced + shuffled[n_test_pos:]

    shuffled_neg = list(negatives)
    rng.shuffle(shuffled_neg)
    need = len(train_pos) + len(test_pos)
    if need > len(shuffled_neg):
        raise InputError(
            f"need {need} high-confidence negatives for balanced splits, "
            f"have {len(shuffled_neg)}"
        )
    train_neg = shuffled_neg[: len(train_pos)]
    test_neg = shuffled_neg[len(train_pos) : need]
    unbl_neg = shuffled_neg[need:]

    return {
        "train": make_split("train", train_pos + train_neg),
        "test": make_split("test", test_pos + test_neg),
        "unbl": make_split("unbl", unbl_neg),
        "extd": make_split("extd", low),
    }


def save_splits(splits: dict[str, DatasetSplit], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name in SPLIT_NAMES:
            if name not in splits:
                continue
            for page_id in splits[name].page_ids:
                fh.write(json.dumps({"page_id": page_id, "split": name}))
                fh.write("\n")


def load_split_assignment(path) -> dict[str, str]:
    """Read a split manifest back as page_id -> split name."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[rec["page_id"]] = rec["split"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"line {lineno}: bad split record ({exc})") from exc
    return out


def allocate_proportional(
    sizes: dict[Hashable, int], k: int, min_coverage: int | None = None
) -> dict[Hashable, int]:
    """Allocate k draws across groups proportionally to group size.

    Largest-remainder rounding; ties broken by remainder, then group size,
    then key order, so the allocation is deterministic. min_coverage asks
    for at least that many distinct groups in the result (None means every
    nonempty group), rebalanced from the largest allocations, bounded by k
    and the number of nonempty groups.
    """
    total = sum(sizes.values())
    if k > total:
        raise InputError(f"cannot allocate {k} draws from {total} items")
    nonempty = {g: n for g, n in sizes.items() if n > 0}
    if k == 0 or not nonempty:
        return {g: 0 for g in sizes}

    order = sorted(nonempty, key=lambda g: (-nonempty[g], str(g)))
    alloc = {}
    remainders = []
    for g in order:
        quota = k * nonempty[g] / total
        alloc[g] = math.floor(quota)
        remainders.append((quota - alloc[g], nonempty[g], g))
    leftover = k - sum(alloc.values())
    remainders.sort(key=lambda t: (-t[0], -t[1], str(t[2])))
    for frac, size, g in remainders:
        if leftover == 0:
            break
        if alloc[g] < nonempty[g]:
            alloc[g] += 1
            leftover -= 1

    want_covered = min(k, len(nonempty))
    if min_coverage is not None:
        want_covered = min(want_covered, min_coverage)
    covered = [g for g in order if alloc[g] > 0]
    empty = [g for g in order if alloc[g] == 0]  # largest first
    while len(covered) < want_covered and empty:
        donor = max(covered, key=lambda g: (alloc[g], nonempty[g], str(g)))
        if alloc[donor] <= 1:
            break
        receiver = empty.pop(0)
        alloc[donor] -= 1
        alloc[receiver] = 1
        covered.append(receiver)

    for g in sizes:
        alloc.setdefault(g, 0)
    return alloc


def sample_negatives_random(
    negatives: Sequence[WebPage], k: int, seed: int
) -> list[WebPage]:
    """Uniform sample of k pages without replacement, deterministic per seed."""
    if k > len(negatives):
        raise InputError(f"k={k} exceeds {len(negatives)} negatives")
    rng = random.Random(seed)
    return rng.sample(list(negatives), k)


@dataclass
class StratifiedConfig:
    top_domains: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        if self.top_domains < 1:
            raise InputError("top_domains must be >= 1")


def page_domain(page: WebPage) -> str:
    host = parse_url(page.url).host
    return host[4:] if host.startswith("www.") else host


def sample_negatives_stratified(
    negatives: Sequence[WebPage], k: int, cfg: StratifiedConfig
) -> list[WebPage]:
    """Domain-stratified sample: the top_domains most frequent domains form
    individual strata, everything else one "others" stratum, and k is spread
    proportionally (largest remainder) with each stratum capped at its size.
    """
    if k > len(negatives):
        raise InputError(f"k={k} exceeds {len(negatives)} negatives")
    by_domain: dict[str, list[WebPage]] = {}
    for page in negatives:
        by_domain.setdefault(page_domain(page), []).append(page)
    ranked = sorted(by_domain, key=lambda d: (-len(by_domain[d]), d))
    top = set(ranked[: cfg.top_domains])

    strata: dict[str, list[WebPage]] = {d: by_domain[d] for d in top}
    others = [p for d in ranked[cfg.top_domains :] for p in by_domain[d]]
    if others:
        strata["__others__"] = others

    # Proportional shares, nudged to touch at least two strata so one heavy
    # domain can never be the whole sample.
    alloc = allocate_proportional(
        {d: len(m) for d, m in strata.items()}, k, min_coverage=2
    )
    rng = random.Random(cfg.seed)
    out: list[WebPage] = []
    for name in sorted(strata):
        take = alloc[name]
        if take:
            out.extend(rng.sample(strata[name], take))
    return out


_TERM_RE = re.compile(r"\w+", re.UNICODE)


def _terms(text: str) -> list[str]:
    return _TERM_RE.findall(text.lower())


class TfidfVectorizer:
    """Term-frequency / inverse-document-frequency features.

    Vocabulary is the max_terms most frequent terms in the fit corpus,
    tf is the raw in-document count, idf = ln((1+N)/(1+df)) + 1, and output
    vectors are L2-normalized sparse {column: weight} maps.
    """

    def __init__(self, max_terms: int = 10_000):
        self.max_terms = max_terms
        self.vocabulary: dict[str, int] | None = None
        self.idf: np.ndarray | None = None

    def fit(self, texts: Iterable[str]) -> "TfidfVectorizer":
        totals: dict[str, int] = {}
        doc_freq: dict[str, int] = {}
        n_docs = 0
        any_terms = False
        for text in texts:
            n_docs += 1
            terms = _terms(text)
            if terms:
                any_terms = True
            seen = set()
            for t in terms:
                totals[t] = totals.get(t, 0) + 1
                if t not in seen:
                    seen.add(t)
                    doc_freq[t] = doc_freq.get(t, 0) + 1
        if n_docs == 0 or not any_terms:
            raise InputError("tfidf fit needs at least one nonempty text")
        ranked = sorted(totals, key=lambda t: (-totals[t], t))[: self.max_terms]
        self.vocabulary = {t: i for i, t in enumerate(ranked)}
        self.idf = np.array(
            [math.log((1 + n_docs) / (1 + doc_freq[t])) + 1.0 for t in ranked]
        )
        return self

    @property
    def dim(self) -> int:
        if self.vocabulary is None:
            raise RuntimeError("vectorizer not fitted")
        return len(self.vocabulary)

    def transform(self, text: str) -> dict[int, float]:
        if self.vocabulary is None or self.idf is None:
            raise RuntimeError("transform called before fit")
        counts: dict[int, int] = {}
        for t in _terms(text):
            col = self.vocabulary.get(t)
            if col is not None:
                counts[col] = counts.get(col, 0) + 1
        vec = {col: c * self.idf[col] for col, c in counts.items()}
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm == 0:
            return {}
        return {col: w / norm for col, w in vec.items()}

    def transform_matrix(self, texts: Sequence[str]) -> np.ndarray:
        dense = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            for col, w in self.transform(text).items():
                dense[i, col] = w
        return dense

    def to_dict(self) -> dict:
        if self.vocabulary is None or self.idf is None:
            raise RuntimeError("vectorizer not fitted")
        terms = sorted(self.vocabulary, key=self.vocabulary.get)
        return {
            "max_terms": self.max_terms,
            "vocabulary": terms,
            "idf": [float(x) for x in self.idf],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TfidfVectorizer":
        model = cls(max_terms=data["max_terms"])
        model.vocabulary = {t: i for i, t in enumerate(data["vocabulary"])}
        model.idf = np.array(data["idf"], dtype=float)
        return model


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (dim, n_features), rows ordered by variance
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        return (np.asarray(vectors, dtype=float) - self.mean) @ self.components.T


def pca_fit(vectors: np.ndarray, dim: int) -> PcaModel:
    """Fit a PCA projection via SVD of the mean-centered data.

    Eigenvalues use the sample-covariance convention (divide by n-1), so
    discarded-variance accounting matches an explicit covariance
    eigendecomposition.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise InputError("expected a 2-D matrix")
    n, d = x.shape
    if not 1 <= dim <= min(n, d):
        raise InputError(f"dim must be in [1, {min(n, d)}], got {dim}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    denom = max(n - 1, 1)
    variances = (s * s) / denom
    total = variances.sum()
    ratio = variances / total if total > 0 else np.zeros_like(variances)
    return PcaModel(
        mean=mean,
        components=vt[:dim],
        explained_variance=variances[:dim],
        explained_variance_ratio=ratio[:dim],
    )


def pca_reduce(vectors: np.ndarray, dim: int) -> np.ndarray:
    """Project vectors onto their top-dim principal components."""
    return pca_fit(vectors, dim).transform(vectors)


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density clustering under Euclidean distance; noise labeled -1.

    A point is core iff it has >= min_pts neighbors within eps (itself
    included). Clusters are connected components of core points; a non-core
    point joins the cluster of its nearest core neighbor within eps, which
    keeps the partition independent of input order.
    """
    if eps <= 0:
        raise InputError("eps must be > 0")
    if min_pts < 1:
        raise InputError("min_pts must be >= 1")
    x = np.asarray(points, dtype=float)
    if x.size == 0:
        return np.empty(0, dtype=int)
    if x.ndim != 2:
        raise InputError("expected a 2-D matrix of points")
    n = x.shape[0]

    sq = np.sum(x * x, axis=1)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    within = dist2 <= eps * eps
    core = within.sum(axis=1) >= min_pts

    labels = np.full(n, -1, dtype=int)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        frontier = [i]
        labels[i] = cluster
        while frontier:
            j = frontier.pop()
            for nb in np.flatnonzero(within[j] & core):
                if labels[nb] == -1:
                    labels[nb] = cluster
                    frontier.append(int(nb))
        cluster += 1

    for i in range(n):
        if labels[i] != -1 or core[i]:
            continue
        reachable = np.flatnonzero(within[i] & core)
        if reachable.size:
            nearest = reachable[np.argmin(dist2[i, reachable])]
            labels[i] = labels[nearest]
    return labels


@dataclass
class ClusterSamplerConfig:
    tfidf_dim: int = 10_000
    pca_dim: int = 100
    dbscan_eps: float = 0.5
    dbscan_min_pts: int = 5

    def __post_init__(self) -> None:
        if self.pca_dim > self.tfidf_dim:
            raise InputError("pca_dim must be <= tfidf_dim")
        if self.dbscan_eps <= 0:
            raise InputError("dbscan_eps must be > 0")
        if self.dbscan_min_pts < 1:
            raise InputError("dbscan_min_pts must be >= 1")


def sample_negatives_cluster(
    negatives: Sequence[WebPage], k: int, cfg: ClusterSamplerConfig, seed: int
) -> list[WebPage]:
    """Cluster-based sample: TF-IDF vectors reduced with PCA, clustered with
    DBSCAN, then k spread across clusters (noise included) proportionally.
    """
    if k > len(negatives):
        raise InputError(f"k={k} exceeds {len(negatives)} negatives")
    if k == 0:
        return []
    texts = [p.text or "" for p in negatives]
    tfidf = TfidfVectorizer(max_terms=cfg.tfidf_dim).fit(texts)
    dense = tfidf.transform_matrix(texts)
    dim = min(cfg.pca_dim, dense.shape[0], dense.shape[1])
    reduced = pca_reduce(dense, dim)
    labels = dbscan(reduced, cfg.dbscan_eps, cfg.dbscan_min_pts)

    members: dict[int, list[WebPage]] = {}
    for page, label in zip(negatives, labels):
        members.setdefault(int(label), []).append(page)
    alloc = allocate_proportional({c: len(m) for c, m in members.items()}, k)
    rng = random.Random(seed)
    out: list[WebPage] = []
    for c in sorted(members):
        take = alloc[c]
        if take:
            out.extend(rng.sample(members[c], take))
    return out
