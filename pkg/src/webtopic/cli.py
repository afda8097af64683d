"""Command-line surface for the classification pipeline.

Each command reads and writes the JSONL formats owned by the library
modules. Outputs are written to a temp file and renamed, so a failing
command never leaves a partial file behind. Exit codes: 0 success, 1 input
error, 2 transport/backend error, 3 internal error.
"""

from __future__ import annotations

import csv
import functools
import json
import os
import tempfile
from contextlib import contextmanager

import click

from webtopic import baselines, pipeline, sampling
from webtopic.chunker import Chunk, ChunkerConfig, chunk_page
from webtopic.config import cget, load_config, require
from webtopic.corpus import (
    FetchConfig,
    WebPage,
    extract_text,
    fetch_page,
    gen_synthetic_corpus,
    load_corpus,
    save_corpus,
)
from webtopic.errors import InputError, TransportError
from webtopic.evaluation import (
    EvalReport,
    TopicSplitMetrics,
    bench_throughput,
    compute_metrics,
    emit_report,
    format_report_table,
    mcnemar,
    pr_curve,
)
from webtopic.icl import GenerationParams, PromptConfig, build_prompt, parse_answer, sample_demonstrators
from webtopic.sampling import (
    ClusterSamplerConfig,
    DatasetSplit,
    SplitSpec,
    StratifiedConfig,
    load_split_assignment,
    sample_negatives_cluster,
    sample_negatives_random,
    sample_negatives_stratified,
    save_splits,
)
from webtopic.scoring import TrainConfig, backend_train, open_backend

EXIT_INPUT = 1
EXIT_TRANSPORT = 2
EXIT_INTERNAL = 3

# Bad flags and missing arguments are input errors (exit 1); click would
# otherwise exit 2, which this tool reserves for transport failures.
click.exceptions.UsageError.exit_code = EXIT_INPUT


@contextmanager
def atomic_output(path: str):
    """Yield a temp path, renamed over the target only on success."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def pipeline_command(fn):
    """Shared error handling and exit-code mapping for commands."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InputError, FileNotFoundError, IsADirectoryError) as exc:
            raise SystemExit(_fail(EXIT_INPUT, exc))
        except TransportError as exc:
            raise SystemExit(_fail(EXIT_TRANSPORT, exc))
        except click.ClickException:
            raise
        except SystemExit:
            raise
        except Exception as exc:  # invariant violations, bugs
            raise SystemExit(_fail(EXIT_INTERNAL, exc))

    return wrapper


def _fail(code: int, exc: Exception) -> int:
    click.echo(f"error: {exc}", err=True)
    return code


def _load_chunks(path: str) -> dict[str, list[Chunk]]:
    by_page: dict[str, list[Chunk]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                chunk = Chunk(**rec)
            except (json.JSONDecodeError, TypeError) as exc:
                raise InputError(f"line {lineno}: bad chunk record ({exc})") from exc
            by_page.setdefault(chunk.page_id, []).append(chunk)
    for chunks in by_page.values():
        chunks.sort(key=lambda c: c.index)
    return by_page


def _pages_for_split(corpus, split_of, want: str):
    if want == "all":
        return [p for p in corpus if p.id in split_of]
    return [p for p in corpus if split_of.get(p.id) == want]


def _seed(cfg: dict, flag: int | None) -> int:
    return int(require(flag if flag is not None else cget(cfg, "seed"), "seed"))


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file; flags override its values.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker cap for commands that parallelize.")
@click.pass_context
def main(ctx, config_path, jobs):
    """Topic-related webpage detection pipeline."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["cfg"] = load_config(config_path)
    except InputError as exc:
        raise SystemExit(_fail(EXIT_INPUT, exc))
    ctx.obj["jobs"] = max(1, jobs)


@main.command("gen-synthetic")
@click.option("--keywords", required=True, help="Comma-separated topic keywords.")
@click.option("--n-pos", type=int, required=True)
@click.option("--n-neg", type=int, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--topic", default="synthetic", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
@pipeline_command
def cmd_gen_synthetic(ctx, keywords, n_pos, n_neg, seed, topic, out_path):
    """Generate a deterministic synthetic keyword corpus."""
    seed = _seed(ctx.obj["cfg"], seed)
    pages = gen_synthetic_corpus(
        [k.strip() for k in keywords.split(",") if k.strip()],
        n_pos, n_neg, seed, topic=topic,
    )
    with atomic_output(out_path) as tmp:
        save_corpus(pages, tmp)
    click.echo(f"wrote {len(pages)} pages to {out_path}")


@main.command("ingest")
@click.option("--urls", "urls_path", required=True, type=click.Path(),
              help="CSV with header: url,topic,label[,confidence,source].")
@click.option("--out", "out_path", required=True, type=click.Path())
@pipeline_command
def cmd_ingest(urls_path, out_path):
    """Turn a labeled URL list into an unfetched corpus file."""
    pages = []
    with open(urls_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "url" not in reader.fieldnames:
            raise InputError(f"{urls_path}: need a CSV header with a url column")
        for i, row in enumerate(reader):
            pages.append(
                WebPage(
                    id=f"p{i:06d}",
                    url=row["url"],
                    topic=row.get("topic") or "",
                    label=row.get("label") or "negative",
                    confidence=row.get("confidence") or "high",
                    source=row.get("source") or "panel",
                )
            )
    with atomic_output(out_path) as tmp:
        save_corpus(pages, tmp)
    click.echo(f"ingested {len(pages)} pages to {out_path}")


@main.command("fetch")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--timeout", type=float, default=None)
@click.option("--max-body", type=int, default=None)
@click.option("--max-redirects", type=int, default=None)
@click.pass_context
@pipeline_command
def cmd_fetch(ctx, corpus_path, out_path, timeout, max_body, max_redirects):
    """Fetch HTML for pages that have not been fetched yet."""
    cfg = ctx.obj["cfg"]
    fetch_cfg = FetchConfig(
        timeout=timeout if timeout is not None else cget(cfg, "fetch.timeout", 15.0),
        max_body=max_body if max_body is not None else cget(cfg, "fetch.max_body", 5 * 1024 * 1024),
        user_agent=cget(cfg, "fetch.user_agent", FetchConfig().user_agent),
        max_redirects=max_redirects if max_redirects is not None else cget(cfg, "fetch.max_redirects", 5),
    )
    pages = load_corpus(corpus_path)
    jobs = ctx.obj["jobs"]

    def fetch_one(page: WebPage) -> WebPage:
        if page.fetch_status != "not_fetched":
            return page
        result = fetch_page(page.url, fetch_cfg)
        page.html = result.html
        page.fetch_status = result.fetch_status
        page.http_status = result.http_status
        return page

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pages = list(pool.map(fetch_one, pages))
    else:
        pages = [fetch_one(p) for p in pages]
    with atomic_output(out_path) as tmp:
        save_corpus(pages, tmp)
    ok = sum(1 for p in pages if p.fetch_status == "ok")
    click.echo(f"fetched {ok}/{len(pages)} pages ok, wrote {out_path}")


@main.command("extract")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@pipeline_command
def cmd_extract(corpus_path, out_path):
    """Extract plain text from fetched HTML."""
    pages = load_corpus(corpus_path)
    n = 0
    for page in pages:
        if page.html is not None and page.text is None:
            page.text = extract_text(page.html)
            n += 1
    with atomic_output(out_path) as tmp:
        save_corpus(pages, tmp)
    click.echo(f"extracted text for {n} pages, wrote {out_path}")


@main.command("chunk")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--max-tokens", type=int, default=None)
@click.option("--overlap-tokens", type=int, default=None)
@click.pass_context
@pipeline_command
def cmd_chunk(ctx, corpus_path, out_path, max_tokens, overlap_tokens):
    """Split page text into labeled chunks."""
    cfg = ctx.obj["cfg"]
    chunk_cfg = ChunkerConfig(
        max_tokens=max_tokens if max_tokens is not None else cget(cfg, "chunker.max_tokens", 384),
        overlap_tokens=overlap_tokens if overlap_tokens is not None else cget(cfg, "chunker.overlap_tokens", 64),
    )
    pages = load_corpus(corpus_path)
    n_chunks = 0
    with atomic_output(out_path) as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            for page in pages:
                if not page.text:
                    continue
                for chunk in chunk_page(page, chunk_cfg):
                    fh.write(json.dumps(chunk.__dict__, ensure_ascii=False, sort_keys=True))
                    fh.write("\n")
                    n_chunks += 1
    click.echo(f"wrote {n_chunks} chunks to {out_path}")


@main.command("split")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--train-pos-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
@pipeline_command
def cmd_split(ctx, corpus_path, out_path, train_pos_fraction, seed):
    """Build train/test/unbl/extd splits."""
    cfg = ctx.obj["cfg"]
    spec = SplitSpec(
        train_pos_fraction=train_pos_fraction if train_pos_fraction is not None
        else cget(cfg, "split.train_pos_fraction", 0.9),
        seed=_seed(cfg, seed),
        augmented_to_train_only=cget(cfg, "split.augmented_to_train_only", True),
    )
    corpus = load_corpus(corpus_path)
    splits = sampling.build_splits(corpus, spec)
    with atomic_output(out_path) as tmp:
        save_splits(splits, tmp)
    counts = ", ".join(
        f"{name}: {s.n_pos}+/{s.n_neg}-" for name, s in splits.items()
    )
    click.echo(f"wrote splits ({counts}) to {out_path}")


@main.command("sample")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--splits", "splits_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--strategy", type=click.Choice(["random", "stratified", "cluster"]),
              default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
@pipeline_command
def cmd_sample(ctx, corpus_path, splits_path, out_path, strategy, seed):
    """Re-pick the train-split negatives with a sampling strategy.

    Candidates are the current train negatives plus the unbl pool; displaced
    negatives return to unbl. Test and extd are untouched.
    """
    cfg = ctx.obj["cfg"]
    strategy = strategy or cget(cfg, "sampler.strategy", "random")
    seed = _seed(cfg, seed)
    corpus = load_corpus(corpus_path)
    by_id = {p.id: p for p in corpus}
    split_of = load_split_assignment(splits_path)

    train_pages = [by_id[i] for i in split_of if split_of[i] == "train" and i in by_id]
    train_pos = [p for p in train_pages if p.label == "positive"]
    k = len(train_pos)
    pool = [
        by_id[i]
        for i, s in split_of.items()
        if s in ("train", "unbl") and i in by_id and by_id[i].label == "negative"
    ]
    if strategy == "random":
        chosen = sample_negatives_random(pool, k, seed)
    elif strategy == "stratified":
        chosen = sample_negatives_stratified(
            pool, k,
            StratifiedConfig(top_domains=cget(cfg, "sampler.top_domains", 128), seed=seed),
        )
    else:
        chosen = sample_negatives_cluster(
            pool, k,
            ClusterSamplerConfig(
                tfidf_dim=cget(cfg, "sampler.tfidf_dim", 10_000),
                pca_dim=cget(cfg, "sampler.pca_dim", 100),
                dbscan_eps=cget(cfg, "sampler.dbscan_eps", 0.5),
                dbscan_min_pts=cget(cfg, "sampler.dbscan_min_pts", 5),
            ),
            seed,
        )
    chosen_ids = {p.id for p in chosen}
    new_split_of = dict(split_of)
    for p in pool:
        new_split_of[p.id] = "train" if p.id in chosen_ids else "unbl"

    splits: dict[str, DatasetSplit] = {}
    for name in sampling.SPLIT_NAMES:
        members = [by_id[i] for i, s in sorted(new_split_of.items()) if s == name and i in by_id]
        splits[name] = sampling.make_split(name, members)
    with atomic_output(out_path) as tmp:
        save_splits(splits, tmp)
    click.echo(f"re-sampled {k} train negatives ({strategy}), wrote {out_path}")


@main.command("train-baseline")
@click.option("--kind", type=click.Choice(["svm", "lib"]), required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--splits", "splits_path", required=True, type=click.Path())
@click.option("--chunks", "chunks_path", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--feature-mode", type=click.Choice(["url_only", "url_and_content"]),
              default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
@pipeline_command
def cmd_train_baseline(ctx, kind, corpus_path, splits_path, chunks_path, out_path,
                       feature_mode, seed):
    """Train the SVM or LIB baseline on the train split."""
    cfg = ctx.obj["cfg"]
    corpus = load_corpus(corpus_path)
    split_of = load_split_assignment(splits_path)
    train_pages = _pages_for_split(corpus, split_of, "train")
    if not train_pages:
        raise InputError("train split is empty")

    if kind == "svm":
        feature_mode = feature_mode or cget(cfg, "baseline.feature_mode", "url_and_content")
        chunks_by_page: dict[str, list[Chunk]] = {}
        if feature_mode == "url_and_content":
            if not chunks_path:
                raise InputError("url_and_content training needs --chunks")
            chunks_by_page = _load_chunks(chunks_path)
        bundle = pipeline.train_svm_bundle(
            train_pages, chunks_by_page, feature_mode,
            tfidf_dim=cget(cfg, "baseline.tfidf_dim", 10_000),
            lambda_=cget(cfg, "baseline.lambda", 1e-4),
            epochs=cget(cfg, "baseline.epochs", 10),
            seed=_seed(cfg, seed),
        )
        payload = bundle.to_dict()
    else:
        model = pipeline.train_lib_model(
            train_pages, order=cget(cfg, "baseline.lib_order", 4)
        )
        payload = baselines.lib_to_dict(model)
    with atomic_output(out_path) as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
    click.echo(f"trained {kind} baseline on {len(train_pages)} pages, wrote {out_path}")


@main.command("train-neural")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--splits", "splits_path", required=True, type=click.Path())
@click.option("--chunks", "chunks_path", required=True, type=click.Path())
@click.option("--endpoint", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
@pipeline_command
def cmd_train_neural(ctx, corpus_path, splits_path, chunks_path, endpoint, out_path):
    """Fine-tune a backend model on the train split's chunks."""
    cfg = ctx.obj["cfg"]
    endpoint = require(endpoint or cget(cfg, "backend.endpoint"), "backend endpoint")
    train_cfg = TrainConfig(
        learning_rate=cget(cfg, "backend.train.learning_rate", 2e-5),
        max_epochs=cget(cfg, "backend.train.max_epochs", 3),
        warmup_steps=cget(cfg, "backend.train.warmup_steps", 500),
        weight_decay=cget(cfg, "backend.train.weight_decay", 0.01),
        max_seq_tokens=cget(cfg, "backend.train.max_seq_tokens", 512),
        feature_mode=cget(cfg, "backend.train.feature_mode", "url_and_content"),
    )
    corpus = load_corpus(corpus_path)
    split_of = load_split_assignment(splits_path)
    train_pages = _pages_for_split(corpus, split_of, "train")
    chunks_by_page = _load_chunks(chunks_path)
    examples = pipeline.training_texts(train_pages, chunks_by_page, train_cfg.feature_mode)
    with open_backend(endpoint) as backend:
        model_id = backend_train(examples, train_cfg, backend)
    payload = {
        "format": "webtopic-neural",
        "version": 1,
        "model_id": model_id,
        "endpoint": endpoint,
        "train_config": train_cfg.to_dict(),
    }
    with atomic_output(out_path) as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
    click.echo(f"trained backend model {model_id}, wrote {out_path}")


@main.command("classify")
@click.option("--method", type=click.Choice(["svm", "lib", "neural"]), required=True)
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--splits", "splits_path", required=True, type=click.Path())
@click.option("--chunks", "chunks_path", type=click.Path(), default=None)
@click.option("--split", "which_split", default="test", show_default=True,
              help="Which split to classify: train/test/unbl/extd/all.")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
@pipeline_command
def cmd_classify(ctx, method, model_path, corpus_path, splits_path, chunks_path,
                 which_split, threshold, out_path):
    """Score chunks and aggregate to document labels."""
    cfg = ctx.obj["cfg"]
    corpus = load_corpus(corpus_path)
    split_of = load_split_assignment(splits_path)
    pages = _pages_for_split(corpus, split_of, which_split)
    if not pages:
        raise InputError(f"no pages in split {which_split!r}")
    with open(model_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)

    if method == "svm":
        bundle = pipeline.SvmBundle.from_dict(payload)
        chunks_by_page = _load_chunks(chunks_path) if chunks_path else {}
        if bundle.feature_mode == "url_and_content" and not chunks_path:
            raise InputError("url_and_content classification needs --chunks")
        preds = pipeline.classify_with_svm(bundle, pages, chunks_by_page, split_of, threshold)
    elif method == "lib":
        model = baselines.lib_from_dict(payload)
        preds = pipeline.classify_with_lib(model, pages, split_of, threshold)
    else:
        if payload.get("format") != "webtopic-neural":
            raise InputError("not a neural model file")
        chunks_by_page = _load_chunks(chunks_path) if chunks_path else {}
        feature_mode = payload["train_config"]["feature_mode"]
        if feature_mode == "url_and_content" and not chunks_path:
            raise InputError("url_and_content classification needs --chunks")
        with open_backend(payload["endpoint"]) as backend:
            preds = pipeline.classify_with_backend(
                payload["model_id"], backend, pages, chunks_by_page, split_of,
                feature_mode=feature_mode, threshold=threshold,
                batch_size=cget(cfg, "backend.batch_size", 64),
            )
    with atomic_output(out_path) as tmp:
        pipeline.save_predictions(preds, tmp)
    n_pos = sum(1 for p in preds if p.predicted == "positive")
    click.echo(f"classified {len(preds)} pages ({n_pos} positive), wrote {out_path}")


@main.command("prompt-pack")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--splits", "splits_path", required=True, type=click.Path())
@click.option("--chunks", "chunks_path", required=True, type=click.Path())
@click.option("--split", "which_split", default="test", show_default=True)
@click.option("--topic-description", default=None)
@click.option("--k", "k_demonstrators", type=int, default=None)
@click.option("--sampling", "sampling_mode",
              type=click.Choice(["random", "balanced", "knn"]), default=None)
@click.option("--endpoint", default=None,
              help="Backend for embeddings; only needed for knn sampling.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
@pipeline_command
def cmd_prompt_pack(ctx, corpus_path, splits_path, chunks_path, which_split,
                    topic_description, k_demonstrators, sampling_mode, endpoint,
                    seed, out_path):
    """Render all prompts for a split into a JSONL pack for offline runs."""
    cfg = ctx.obj["cfg"]
    prompt_cfg = PromptConfig(
        topic_description=require(
            topic_description or cget(cfg, "icl.topic_description"), "topic description"
        ),
        k_demonstrators=k_demonstrators if k_demonstrators is not None
        else cget(cfg, "icl.k_demonstrators", 4),
        sampling=sampling_mode or cget(cfg, "icl.sampling", "random"),
        seed=_seed(cfg, seed),
    )
    gen = GenerationParams(
        temperature=cget(cfg, "icl.temperature", 0.3),
        top_k=cget(cfg, "icl.top_k", 50),
        top_p=cget(cfg, "icl.top_p", 0.95),
    )
    corpus = load_corpus(corpus_path)
    split_of = load_split_assignment(splits_path)
    chunks_by_page = _load_chunks(chunks_path)
    train_chunks = [
        c for p in _pages_for_split(corpus, split_of, "train")
        for c in chunks_by_page.get(p.id, [])
    ]
    eval_pages = _pages_for_split(corpus, split_of, which_split)
    if not eval_pages:
        raise InputError(f"no pages in split {which_split!r}")

    embed_fn = None
    backend = None
    if prompt_cfg.sampling == "knn":
        from webtopic.scoring import backend_embed

        endpoint = require(endpoint or cget(cfg, "backend.endpoint"), "backend endpoint")
        backend = open_backend(endpoint)
        embed_fn = lambda texts: backend_embed(texts, backend)
    try:
        n = 0
        with atomic_output(out_path) as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                for page in eval_pages:
                    for chunk in chunks_by_page.get(page.id, []):
                        demos = sample_demonstrators(
                            train_chunks, chunk, prompt_cfg, embed=embed_fn
                        )
                        prompt = build_prompt(chunk.text, demos, prompt_cfg)
                        fh.write(json.dumps({
                            "page_id": page.id,
                            "chunk_index": chunk.index,
                            "gold": page.label,
                            "prompt": prompt,
                            "temperature": gen.temperature,
                            "top_k": gen.top_k,
                            "top_p": gen.top_p,
                        }, ensure_ascii=False, sort_keys=True))
                        fh.write("\n")
                        n += 1
    finally:
        if backend is not None:
            backend.close()
    click.echo(f"wrote {n} prompts to {out_path}")


@main.command("parse-responses")
@click.option("--responses", "responses_path", required=True, type=click.Path(),
              help="JSONL of {page_id, chunk_index, gold?, text}.")
@click.option("--corpus", "corpus_path", type=click.Path(), default=None,
              help="Corpus for gold labels when responses lack them.")
@click.option("--splits", "splits_path", type=click.Path(), default=None)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@pipeline_command
def cmd_parse_responses(responses_path, corpus_path, splits_path, threshold, out_path):
    """Parse model responses and aggregate chunk answers per document."""
    gold_of: dict[str, str] = {}
    if corpus_path:
        gold_of = {p.id: p.label for p in load_corpus(corpus_path)}
    split_of = load_split_assignment(splits_path) if splits_path else {}

    by_page: dict[str, list[tuple[int, str, str]]] = {}
    with open(responses_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                by_page.setdefault(rec["page_id"], []).append(
                    (rec.get("chunk_index", 0), rec["text"], rec.get("gold", ""))
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"line {lineno}: bad response record ({exc})") from exc
    if not by_page:
        raise InputError("responses file is empty")

    preds = []
    n_unparseable = 0
    for page_id in sorted(by_page):
        rows = sorted(by_page[page_id])
        values = [parse_answer(text).value for _, text, _ in rows]
        n_unp = sum(1 for v in values if v == "unparseable")
        n_unparseable += n_unp
        scores = [1.0 if v == "positive" else 0.0 for v in values]
        predicted = "positive" if any(v == "positive" for v in values) else "negative"
        gold = gold_of.get(page_id) or next((g for _, _, g in rows if g), "")
        preds.append(pipeline.Prediction(
            page_id=page_id, topic="", split=split_of.get(page_id, ""),
            gold=gold, predicted=predicted,
            doc_score=max(scores), chunk_scores=scores, n_unparseable=n_unp,
        ))
    with atomic_output(out_path) as tmp:
        pipeline.save_predictions(preds, tmp)
    click.echo(
        f"parsed {sum(len(r) for r in by_page.values())} responses for "
        f"{len(preds)} pages ({n_unparseable} unparseable), wrote {out_path}"
    )


@main.command("eval")
@click.option("--predictions", "pred_path", required=True, type=click.Path())
@click.option("--topic", default=None)
@click.option("--out", "out_prefix", required=True,
              help="Report path prefix; writes .json, .txt, _pr.csv.")
@click.pass_context
@pipeline_command
def cmd_eval(ctx, pred_path, topic, out_prefix):
    """Compute metrics and PR curve from a predictions file."""
    preds = pipeline.load_predictions(pred_path)
    if not preds:
        raise InputError("predictions file is empty")
    topic = topic or preds[0].topic or "all"

    report = EvalReport()
    by_split: dict[str, list[pipeline.Prediction]] = {}
    for p in preds:
        by_split.setdefault(p.split or "all", []).append(p)
    for split in sorted(by_split):
        rows = by_split[split]
        m = compute_metrics([(p.gold, p.predicted) for p in rows])
        report.metrics.append(TopicSplitMetrics(
            topic=topic, split=split,
            precision=m.precision, recall=m.recall, f1=m.f1,
            n_pos=m.counts.tp + m.counts.fn, n_neg=m.counts.fp + m.counts.tn,
        ))
    report.unparseable_count = sum(p.n_unparseable for p in preds)
    scored = [(p.gold, p.doc_score) for p in preds]
    if any(g == "positive" for g, _ in scored):
        report.pr_points = pr_curve(scored)
    else:
        raise InputError("no positive gold labels; cannot evaluate")

    directory = os.path.dirname(os.path.abspath(out_prefix)) or "."
    tmp_prefix = os.path.join(directory, f".tmp-report-{os.getpid()}")
    written = emit_report(report, tmp_prefix)
    try:
        for tmp, suffix in zip(written, (".json", ".txt", "_pr.csv")):
            os.replace(tmp, out_prefix + suffix)
    finally:
        for tmp in written:
            if os.path.exists(tmp):
                os.unlink(tmp)
    click.echo(format_report_table(report), nl=False)


@main.command("compare")
@click.option("--a", "path_a", required=True, type=click.Path())
@click.option("--b", "path_b", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@pipeline_command
def cmd_compare(path_a, path_b, out_path):
    """McNemar's test between two prediction files (paired by page_id)."""
    preds_a = {p.page_id: p for p in pipeline.load_predictions(path_a)}
    preds_b = {p.page_id: p for p in pipeline.load_predictions(path_b)}
    shared = sorted(set(preds_a) & set(preds_b))
    if not shared:
        raise InputError("no shared page_ids between the two prediction files")
    paired = [
        (preds_a[i].gold, preds_a[i].predicted, preds_b[i].predicted) for i in shared
    ]
    result = mcnemar(paired)
    payload = {
        "b": result.b, "c": result.c, "statistic": result.statistic,
        "p_value": result.p_value, "method": result.method,
        "significant_at_0_05": result.significant_at_0_05, "n_pairs": len(paired),
    }
    if out_path:
        with atomic_output(out_path) as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
    click.echo(json.dumps(payload, sort_keys=True))


@main.command("bench")
@click.option("--method", type=click.Choice(["svm", "lib"]), required=True)
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--chunks", "chunks_path", required=True, type=click.Path())
@click.option("--runs", type=int, default=5, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@pipeline_command
def cmd_bench(method, model_path, chunks_path, runs, out_path):
    """Measure scoring throughput in chunks/sec over repeated runs."""
    with open(model_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    chunks_by_page = _load_chunks(chunks_path)
    texts = [c.text for chunks in chunks_by_page.values() for c in chunks]
    if not texts:
        raise InputError("no chunks to benchmark")

    if method == "svm":
        bundle = pipeline.SvmBundle.from_dict(payload)

        def score_fn(batch):
            for text in batch:
                baselines.svm_score(bundle.model, bundle.tfidf.transform(text))
    else:
        model = baselines.lib_from_dict(payload)

        def score_fn(batch):
            for text in batch:
                baselines.lib_score(model, text)

    stats = bench_throughput(score_fn, texts, runs=runs)
    payload_out = {
        "chunks_per_sec_mean": stats.chunks_per_sec_mean,
        "chunks_per_sec_stddev": stats.chunks_per_sec_stddev,
        "runs": stats.runs,
        "n_chunks": len(texts),
    }
    if out_path:
        with atomic_output(out_path) as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(payload_out, fh, indent=2, sort_keys=True)
                fh.write("\n")
    click.echo(json.dumps(payload_out, sort_keys=True))


if __name__ == "__main__":
    main()
