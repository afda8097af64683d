"""Recursive document splitting with token overlap.

Pages are split into chunks of at most max_tokens tokens: first on the
coarsest separator, recursing to finer separators for oversized pieces, and
finally falling back to a sliding token window with overlap. Chunks inherit
the label of their parent page.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from webtopic.errors import InputError
from webtopic.corpus import WebPage

Tokenizer = Callable[[str], list[str]]

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Default tokenizer: runs of word characters, or one symbol per token.

    Model-agnostic stand-in for a subword tokenizer; the splitter accepts a
    replacement through its tokenizer argument.
    """
    return _TOKEN_RE.findall(text)


DEFAULT_SEPARATORS = ("\n\n", "\n", ". ", " ")


@dataclass
class ChunkerConfig:
    max_tokens: int = 384
    overlap_tokens: int = 64
    separators: Sequence[str] = DEFAULT_SEPARATORS

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise InputError("max_tokens must be >= 1")
        if not 0 <= self.overlap_tokens < self.max_tokens:
            raise InputError("need 0 <= overlap_tokens < max_tokens")


@dataclass
class Chunk:
    page_id: str
    index: int
    text: str
    token_count: int
    label: str


def _split_keep_separator(text: str, sep: str) -> list[str]:
    # The separator stays attached to the preceding piece so that
    # concatenating the pieces reproduces the input exactly.
    parts = text.split(sep)
    if len(parts) == 1:
        return [text]
    pieces = [part + sep for part in parts[:-1]]
    if parts[-1]:
        pieces.append(parts[-1])
    return pieces


def _window_split(text: str, cfg: ChunkerConfig, tok: Tokenizer) -> list[str]:
    # Pure token window over the piece: width max_tokens, stride
    # (max_tokens - overlap_tokens); slices reuse the original text via the
    # token spans so in-window whitespace survives.
    spans = [m.span() for m in _TOKEN_RE.finditer(text)] if tok is tokenize else None
    if spans is None:
        # Custom tokenizer: locate each token left to right to recover spans.
        spans = []
        pos = 0
        for t in tok(text):
            start = text.find(t, pos)
            if start < 0:  # token not a substring; fall back to search from 0
                start = text.find(t)
                if start < 0:
                    raise InputError("tokenizer produced tokens not found in text")
            spans.append((start, start + len(t)))
            pos = start + len(t)
    n = len(spans)
    if n == 0:
        return []
    stride = cfg.max_tokens - cfg.overlap_tokens
    out = []
    start = 0
    while True:
        end = min(start + cfg.max_tokens, n)
        out.append(text[spans[start][0] : spans[end - 1][1]])
        if end == n:
            break
        start += stride
    return out


def _merge_small(pieces: list[str], cfg: ChunkerConfig, tok: Tokenizer) -> list[str]:
    # Greedily merge adjacent pieces while the merged text stays within the
    # token budget. Counts are recomputed on the merged text, not summed,
    # since joining can fuse tokens at piece boundaries.
    merged: list[str] = []
    buffer = ""
    for piece in pieces:
        if not buffer:
            buffer = piece
            continue
        candidate = buffer + piece
        if len(tok(candidate)) <= cfg.max_tokens:
            buffer = candidate
        else:
            merged.append(buffer)
            buffer = piece
    if buffer:
        merged.append(buffer)
    return merged


def _split_recursive(text: str, cfg: ChunkerConfig, tok: Tokenizer, level: int) -> list[str]:
    if len(tok(text)) <= cfg.max_tokens:
        return [text]
    if level >= len(cfg.separators):
        return _window_split(text, cfg, tok)
    pieces = _split_keep_separator(text, cfg.separators[level])
    if len(pieces) == 1:
        return _split_recursive(text, cfg, tok, level + 1)
    out: list[str] = []
    for piece in pieces:
        if len(tok(piece)) <= cfg.max_tokens:
            out.append(piece)
        else:
            out.extend(_split_recursive(piece, cfg, tok, level + 1))
    return _merge_small(out, cfg, tok)


def split_document(
    text: str, cfg: ChunkerConfig | None = None, tokenizer: Tokenizer = tokenize
) -> list[str]:
    """Split text into chunk texts of at most cfg.max_tokens tokens each.

    Every input token appears in at least one chunk and document order is
    preserved. Consecutive window chunks cut from one oversized piece repeat
    the trailing overlap_tokens tokens.
    """
    cfg = cfg or ChunkerConfig()
    if not tokenizer(text):
        return []
    chunks = _split_recursive(text, cfg, tokenizer, 0)
    return [c for c in chunks if tokenizer(c)]


def chunk_page(
    page: WebPage, cfg: ChunkerConfig | None = None, tokenizer: Tokenizer = tokenize
) -> list[Chunk]:
    """Split one page into labeled chunks, indexed in document order."""
    if not page.text:
        raise InputError(f"page {page.id}: no extracted text")
    cfg = cfg or ChunkerConfig()
    texts = split_document(page.text, cfg, tokenizer)
    return [
        Chunk(
            page_id=page.id,
            index=i,
            text=t,
            token_count=len(tokenizer(t)),
            label=page.label,
        )
        for i, t in enumerate(texts)
    ]
