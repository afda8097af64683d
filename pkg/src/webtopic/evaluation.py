"""Metrics, precision-recall curves, McNemar significance tests, and
throughput benchmarking.

Zero-denominator metrics return 0 rather than NaN so reports over
all-negative splits stay comparable. McNemar uses the exact two-sided
binomial when b + c < 25 and the continuity-corrected chi-square otherwise.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from webtopic.errors import InputError

EXACT_TEST_CUTOFF = 25


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


@dataclass
class MetricResult:
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float


def compute_metrics(preds: Sequence[tuple[str, str]]) -> MetricResult:
    """Precision/recall/F1 from (gold, predicted) label pairs."""
    if not preds:
        raise InputError("no predictions to evaluate")
    c = ConfusionCounts()
    for gold, predicted in preds:
        if gold == "positive":
            if predicted == "positive":
                c.tp += 1
            else:
                c.fn += 1
        else:
            if predicted == "positive":
                c.fp += 1
            else:
                c.tn += 1
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricResult(counts=c, precision=precision, recall=recall, f1=f1)


@dataclass
class PrPoint:
    recall: float
    precision: float
    threshold: float


def pr_curve(scored: Sequence[tuple[str, float]]) -> list[PrPoint]:
    """One (recall, precision) point per distinct score threshold, descending.

    At each threshold t, positive means score >= t, so recall is
    non-decreasing along the returned list.
    """
    n_pos = sum(1 for gold, _ in scored if gold == "positive")
    if n_pos == 0:
        raise InputError("pr_curve needs at least one positive gold label")
    ranked = sorted(scored, key=lambda gs: -gs[1])
    points: list[PrPoint] = []
    tp = fp = 0
    i = 0
    n = len(ranked)
    while i < n:
        threshold = ranked[i][1]
        while i < n and ranked[i][1] == threshold:
            if ranked[i][0] == "positive":
                tp += 1
            else:
                fp += 1
            i += 1
        points.append(
            PrPoint(recall=tp / n_pos, precision=tp / (tp + fp), threshold=threshold)
        )
    return points


def average_precision(scored: Sequence[tuple[str, float]]) -> float:
    """Step-integrated area under the PR curve."""
    points = pr_curve(scored)
    area = 0.0
    prev_recall = 0.0
    for pt in points:
        area += (pt.recall - prev_recall) * pt.precision
        prev_recall = pt.recall
    return area


@dataclass
class McNemarResult:
    b: int  # A wrong, B right
    c: int  # A right, B wrong
    statistic: float | None
    p_value: float
    method: str  # exact_binomial | chi2_cc
    significant_at_0_05: bool


def _binom_cdf(m: int, n: int) -> float:
    return sum(math.comb(n, i) for i in range(m + 1)) / 2.0**n


def mcnemar(paired: Sequence[tuple[str, str, str]]) -> McNemarResult:
    """McNemar's paired test from (gold, predA, predB) triples.

    Only discordant pairs matter: b counts cases A got wrong and B right,
    c the reverse. Small discordance (b + c < 25) uses the exact two-sided
    binomial; otherwise chi-square with continuity correction, 1 dof.
    """
    if not paired:
        raise InputError("no prediction pairs")
    b = c = 0
    for gold, pred_a, pred_b in paired:
        a_right = pred_a == gold
        b_right = pred_b == gold
        if not a_right and b_right:
            b += 1
        elif a_right and not b_right:
            c += 1
    n = b + c
    if n < EXACT_TEST_CUTOFF:
        p = min(1.0, 2.0 * _binom_cdf(min(b, c), n)) if n else 1.0
        return McNemarResult(
            b=b, c=c, statistic=None, p_value=p,
            method="exact_binomial", significant_at_0_05=p < 0.05,
        )
    statistic = (abs(b - c) - 1) ** 2 / n
    # Upper tail of chi-square with 1 dof: erfc(sqrt(x/2)).
    p = math.erfc(math.sqrt(statistic / 2.0))
    return McNemarResult(
        b=b, c=c, statistic=statistic, p_value=p,
        method="chi2_cc", significant_at_0_05=p < 0.05,
    )


@dataclass
class ThroughputStats:
    chunks_per_sec_mean: float
    chunks_per_sec_stddev: float
    runs: int
    per_run: list[float]


def bench_throughput(
    score_fn: Callable[[Sequence[str]], object],
    chunks: Sequence[str],
    runs: int = 5,
) -> ThroughputStats:
    """Wall-clock chunks/sec over several runs of score_fn on the same input.

    Model loading is the caller's problem: pass a ready-to-score function.
    """
    if runs < 1:
        raise InputError("runs must be >= 1")
    if not chunks:
        raise InputError("no chunks to score")
    rates: list[float] = []
    for _ in range(runs):
        start = time.perf_counter()
        score_fn(chunks)
        elapsed = time.perf_counter() - start
        rates.append(len(chunks) / elapsed if elapsed > 0 else float("inf"))
    return ThroughputStats(
        chunks_per_sec_mean=statistics.mean(rates),
        chunks_per_sec_stddev=statistics.pstdev(rates),
        runs=runs,
        per_run=rates,
    )


@dataclass
class TopicSplitMetrics:
    topic: str
    split: str
    precision: float
    recall: float
    f1: float
    n_pos: int
    n_neg: int


@dataclass
class EvalReport:
    metrics: list[TopicSplitMetrics] = field(default_factory=list)
    pr_points: list[PrPoint] = field(default_factory=list)
    unparseable_count: int = 0
    throughput: ThroughputStats | None = None


def report_to_dict(report: EvalReport) -> dict:
    out: dict = {
        "metrics": [
            {
                "topic": m.topic, "split": m.split, "precision": m.precision,
                "recall": m.recall, "f1": m.f1, "n_pos": m.n_pos, "n_neg": m.n_neg,
            }
            for m in report.metrics
        ],
        "pr_curve": [
            {"recall": p.recall, "precision": p.precision, "threshold": p.threshold}
            for p in report.pr_points
        ],
        "unparseable_count": report.unparseable_count,
    }
    if report.throughput is not None:
        t = report.throughput
        out["throughput"] = {
            "chunks_per_sec_mean": t.chunks_per_sec_mean,
            "chunks_per_sec_stddev": t.chunks_per_sec_stddev,
            "runs": t.runs,
            "per_run": t.per_run,
        }
    return out


def report_from_dict(data: dict) -> EvalReport:
    throughput = None
    if "throughput" in data:
        t = data["throughput"]
        throughput = ThroughputStats(
            chunks_per_sec_mean=t["chunks_per_sec_mean"],
            chunks_per_sec_stddev=t["chunks_per_sec_stddev"],
            runs=t["runs"],
            per_run=list(t["per_run"]),
        )
    return EvalReport(
        metrics=[TopicSplitMetrics(**m) for m in data.get("metrics", [])],
        pr_points=[PrPoint(**p) for p in data.get("pr_curve", [])],
        unparseable_count=data.get("unparseable_count", 0),
        throughput=throughput,
    )


def format_report_table(report: EvalReport) -> str:
    lines = [
        f"{'Topic':<16} {'Split':<6} {'Prec':>7} {'Rec':>7} {'F1':>7} {'Pos':>6} {'Neg':>8}",
        "-" * 62,
    ]
    for m in report.metrics:
        lines.append(
            f"{m.topic:<16} {m.split:<6} {m.precision:>7.3f} {m.recall:>7.3f} "
            f"{m.f1:>7.3f} {m.n_pos:>6d} {m.n_neg:>8d}"
        )
    if report.unparseable_count:
        lines.append(f"unparseable responses: {report.unparseable_count}")
    if report.throughput is not None:
        t = report.throughput
        lines.append(
            f"throughput: {t.chunks_per_sec_mean:.1f} +/- "
            f"{t.chunks_per_sec_stddev:.1f} chunks/sec over {t.runs} runs"
        )
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, path_prefix: str) -> list[str]:
    """Write {prefix}.json, {prefix}.txt, and {prefix}_pr.csv; returns paths."""
    json_path = f"{path_prefix}.json"
    txt_path = f"{path_prefix}.txt"
    csv_path = f"{path_prefix}_pr.csv"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(format_report_table(report))
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recall", "precision", "threshold"])
        for p in report.pr_points:
            writer.writerow([p.recall, p.precision, p.threshold])
    return [json_path, txt_path, csv_path]
