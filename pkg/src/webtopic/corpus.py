"""Corpus data model, HTTP fetching, HTML text extraction, and persistence.

Pages are persisted as one JSON object per line (JSONL, UTF-8) so corpora in
the 100k+ range stream without loading everything at once. Raw HTML is
base64-encoded in the JSON record to keep the round trip byte-exact.
"""

from __future__ import annotations

import base64
import hashlib
import json
import random
import re
from dataclasses import dataclass, field, fields
from html.parser import HTMLParser
from typing import Iterable, Iterator
from urllib.parse import urlsplit

import requests

from webtopic.errors import CorpusError, InputError

LABELS = ("positive", "negative")
CONFIDENCES = ("high", "low")
SOURCES = ("panel", "augmented", "synthetic")

# Terminal fetch states. "http_error" carries the status code in
# WebPage.http_status; non-HTTP transport failures leave it as None.
FETCH_STATUSES = ("ok", "http_error", "timeout", "too_large", "not_fetched")


@dataclass
class WebPage:
    """One scraped URL with its label and (optionally) fetched content."""

    id: str
    url: str
    topic: str
    label: str
    confidence: str = "high"
    source: str = "panel"
    html: bytes | None = None
    text: str | None = None
    fetch_status: str = "not_fetched"
    http_status: int | None = None

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise InputError(f"bad label {self.label!r}")
        if self.confidence not in CONFIDENCES:
            raise InputError(f"bad confidence {self.confidence!r}")
        if self.source not in SOURCES:
            raise InputError(f"bad source {self.source!r}")
        if self.fetch_status not in FETCH_STATUSES:
            raise InputError(f"bad fetch_status {self.fetch_status!r}")
        if self.source == "augmented" and self.label != "positive":
            raise InputError("augmented pages are positive-only")
        if self.text is not None and self.html is None:
            raise InputError("text requires html to be present")

    def to_record(self) -> dict:
        rec = {f.name: getattr(self, f.name) for f in fields(self)}
        if self.html is not None:
            rec["html"] = base64.b64encode(self.html).decode("ascii")
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "WebPage":
        rec = dict(rec)
        if rec.get("html") is not None:
            rec["html"] = base64.b64decode(rec["html"])
        known = {f.name for f in fields(cls)}
        unknown = set(rec) - known
        if unknown:
            raise InputError(f"unknown fields {sorted(unknown)}")
        return cls(**rec)


@dataclass
class FetchConfig:
    """HTTP client knobs. The fetcher does a plain GET, no script execution."""

    timeout: float = 15.0
    max_body: int = 5 * 1024 * 1024
    user_agent: str = "webtopic/0.1 (+corpus fetcher)"
    max_redirects: int = 5

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise InputError("timeout must be > 0")
        if self.max_body <= 0:
            raise InputError("max_body must be > 0")
        if self.max_redirects < 0:
            raise InputError("max_redirects must be >= 0")


def _page_id_for_url(url: str) -> str:
    return "u" + hashlib.sha1(url.encode("utf-8")).hexdigest()[:12]


def fetch_page(url: str, cfg: FetchConfig | None = None) -> WebPage:
    """Fetch one URL and return a WebPage recording the outcome.

    Identity fields (topic, label) get neutral defaults; callers merging the
    result into an existing corpus keep their own metadata and copy over
    html/fetch_status/http_status. Never raises on network failure: the
    outcome lands in fetch_status. Bodies longer than cfg.max_body are
    truncated and flagged too_large.
    """
    cfg = cfg or FetchConfig()
    split = urlsplit(url)
    if split.scheme not in ("http", "https") or not split.netloc:
        raise InputError(f"not an http(s) URL: {url!r}")

    page = WebPage(
        id=_page_id_for_url(url), url=url, topic="", label="negative", confidence="low"
    )
    session = requests.Session()
    session.max_redirects = cfg.max_redirects
    try:
        resp = session.get(
            url,
            timeout=cfg.timeout,
            headers={"User-Agent": cfg.user_agent},
            stream=True,
            allow_redirects=True,
        )
    except requests.Timeout:
        page.fetch_status = "timeout"
        return page
    except requests.TooManyRedirects:
        page.fetch_status = "http_error"
        return page
    except requests.RequestException:
        # DNS failure, refused connection, TLS error: no HTTP status to keep.
        page.fetch_status = "http_error"
        return page

    try:
        if not 200 <= resp.status_code < 300:
            page.fetch_status = "http_error"
            page.http_status = resp.status_code
            return page
        body = b""
        try:
            for part in resp.iter_content(chunk_size=65536):
                body += part
                if len(body) > cfg.max_body:
                    page.html = body[: cfg.max_body]
                    page.fetch_status = "too_large"
                    return page
        except requests.Timeout:
            page.fetch_status = "timeout"
            return page
        except requests.RequestException:
            page.fetch_status = "http_error"
            return page
        page.html = body
        page.fetch_status = "ok"
        page.http_status = resp.status_code
        return page
    finally:
        resp.close()
        session.close()


# Tags whose text content is never visible.
_SKIP_CONTENT_TAGS = {"script", "style", "noscript"}

# Tags that start/end a visual block; boundaries become newlines.
_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "br", "caption", "dd", "div",
    "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1",
    "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav", "ol",
    "option", "p", "pre", "section", "select", "table", "tbody", "td", "th",
    "thead", "tr", "ul",
}


class _TextExtractor(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_CONTENT_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_CONTENT_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data: str) -> None:
        if self._skip_depth == 0:
            self.parts.append(data)


def extract_text(html: bytes | str) -> str:
    """Best-effort visible-text extraction from raw HTML.

    Script/style/noscript payloads are dropped, tags stripped, block
    boundaries become single newlines, and whitespace runs inside a line
    collapse to one space. Malformed markup never raises.
    """
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")
    parser = _TextExtractor()
    try:
        parser.feed(html)
        parser.close()
    except Exception:
        pass  # keep whatever was collected before the parser choked
    raw = "".join(parser.parts)
    lines = []
    for line in raw.split("\n"):
        line = re.sub(r"\s+", " ", line).strip()
        if line:
            lines.append(line)
    return "\n".join(lines)


def save_corpus(pages: Iterable[WebPage], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for page in pages:
            fh.write(json.dumps(page.to_record(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def iter_corpus(path) -> Iterator[WebPage]:
    """Stream pages from a JSONL corpus file.

    A malformed record raises CorpusError naming the 1-based line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                yield WebPage.from_record(rec)
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise CorpusError(f"line {lineno}: bad corpus record ({exc})") from exc


def load_corpus(path) -> list[WebPage]:
    return list(iter_corpus(path))


# Word pools for the synthetic corpus. Positive pages mix topic keywords with
# the policy vocabulary; negatives draw only from the distractor vocabulary,
# so the two classes stay linearly separable at the token level.
_POLICY_WORDS = (
    "gesetz regierung bundestag debatte entwurf reform beschluss anhoerung "
    "ministerium verordnung antrag ausschuss abstimmung novelle kommentar "
    "stellungnahme foerderung plan ziel bericht analyse hintergrund politik "
    "partei koalition opposition experten interview zusammenfassung"
).split()

_DISTRACTOR_WORDS = (
    "fussball bundesliga rezept kuchen wetter urlaub strand hotel flug "
    "bahn stau kino film serie musik konzert garten pflanzen werkzeug "
    "auto motor reifen mode schuhe rabatt angebot gewinnspiel horoskop "
    "basteln laufen fitness yoga katzen hunde aquarium schach roman "
    "krimi comic museum theater oper festival markt boerse aktien zins "
    "immobilie miete umzug handy tarif laptop drucker kamera spielzeug"
).split()

_POS_HOSTS = (
    "nachrichten-heute.de", "politik-journal.de", "tagesthema.de",
    "hauptstadt-news.de", "info-portal.de",
)
_NEG_HOSTS = (
    "freizeit-welt.de", "schnaeppchen-blog.de", "sportarena.de",
    "kochinsel.de", "reiselust24.de", "technikecke.de",
)


def _near_miss(keyword: str) -> str:
    # Drop a middle character: close in edit distance, a distinct token.
    if len(keyword) < 4:
        return keyword + keyword[-1]
    mid = len(keyword) // 2
    return keyword[:mid] + keyword[mid + 1 :]


def _sentence(rng: random.Random, words: list[str], n: int) -> str:
    return " ".join(rng.choice(words) for _ in range(n)) + "."


def _page_html(sentences: list[str]) -> bytes:
    body = "".join(f"<p>{s}</p>" for s in sentences)
    return f"<html><body>{body}</body></html>".encode("utf-8")


def gen_synthetic_corpus(
    topic_keywords: list[str],
    n_pos: int,
    n_neg: int,
    seed: int,
    topic: str = "synthetic",
) -> list[WebPage]:
    """Deterministic desk-scale stand-in corpus.

    Positive pages carry a topic keyword in both the URL path (hyphenated,
    SEO style) and the body text; negatives draw from a disjoint distractor
    vocabulary, with roughly one in ten carrying a near-miss token (a keyword
    with a dropped character) to exercise precision.
    """
    if n_pos < 0 or n_neg < 0:
        raise InputError("page counts must be >= 0")
    if n_pos > 0 and not topic_keywords:
        raise InputError("topic_keywords required when n_pos > 0")

    rng = random.Random(seed)
    pages: list[WebPage] = []

    for i in range(n_pos):
        kw = topic_keywords[i % len(topic_keywords)]
        slug_words = [kw] + rng.sample(_POLICY_WORDS, rng.randint(2, 4))
        host = rng.choice(_POS_HOSTS)
        url = f"https://www.{host}/{'-'.join(slug_words)}"
        sentences = [f"{kw} " + _sentence(rng, _POLICY_WORDS, rng.randint(8, 14))]
        for _ in range(rng.randint(2, 6)):
            words = list(_POLICY_WORDS)
            if rng.random() < 0.5:
                words.append(kw)
            sentences.append(_sentence(rng, words, rng.randint(8, 16)))
        html = _page_html(sentences)
        pages.append(
            WebPage(
                id=f"pos-{i:06d}", url=url, topic=topic, label="positive",
                confidence="high", source="synthetic", html=html,
                text=extract_text(html), fetch_status="ok", http_status=200,
            )
        )

    for i in range(n_neg):
        host = rng.choice(_NEG_HOSTS)
        slug_words = rng.sample(_DISTRACTOR_WORDS, rng.randint(1, 4))
        near_miss = topic_keywords and rng.random() < 0.1
        if near_miss:
            slug_words.insert(0, _near_miss(rng.choice(topic_keywords)))
        shape = rng.random()
        if shape < 0.15:
            url = f"https://{host}/suche?q={slug_words[0]}"
        elif shape < 0.3:
            url = f"https://{host}/{slug_words[0]}/index.html"
        else:
            url = f"https://www.{host}/{'-'.join(slug_words)}"
        sentences = []
        for _ in range(rng.randint(2, 6)):
            words = list(_DISTRACTOR_WORDS)
            if near_miss:
                words.append(_near_miss(rng.choice(topic_keywords)))
            sentences.append(_sentence(rng, words, rng.randint(8, 16)))
        html = _page_html(sentences)
        pages.append(
            WebPage(
                id=f"neg-{i:06d}", url=url, topic=topic, label="negative",
                confidence="high", source="synthetic", html=html,
                text=extract_text(html), fetch_status="ok", http_status=200,
            )
        )

    return pages
