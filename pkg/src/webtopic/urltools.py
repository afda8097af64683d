"""URL parsing, classifier feature extraction, and URL categorization.

Classification features use only the path and query of a URL, never the
host, so models cannot memorize domains. Categorization follows fixed
first-match precedence so every URL lands in exactly one category.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from webtopic.errors import InputError

CATEGORIES = (
    "web_search",
    "seo_title",
    "news_no_seo",
    "wikipedia",
    "keyworded_domain",
    "social_media",
    "other",
)

# Query keys that mark a search-results URL. The common single-letter "q"
# generalized with the usual variants.
SEARCH_QUERY_KEYS = frozenset({"q", "query", "search", "p"})

# Social networks matched by host suffix (covers m./de-de. subdomains).
SOCIAL_HOSTS = frozenset(
    {
        "facebook.com", "twitter.com", "x.com", "instagram.com", "tiktok.com",
        "reddit.com", "linkedin.com", "pinterest.com", "snapchat.com",
        "threads.net", "mastodon.social", "telegram.org", "whatsapp.com",
    }
)


@dataclass
class ParsedUrl:
    scheme: str
    host: str
    path: str
    query: list[tuple[str, str]] = field(default_factory=list)


def parse_url(url: str) -> ParsedUrl:
    """Parse a URL, defaulting the scheme to http when absent.

    Percent-encoding is kept verbatim and query order is preserved, so
    reassembling the fields reproduces an equivalent URL.
    """
    if not url or not url.strip():
        raise InputError("empty URL")
    candidate = url.strip()
    if "://" not in candidate:
        candidate = "http://" + candidate
    split = urlsplit(candidate)
    host = split.netloc.lower()
    if not host:
        raise InputError(f"no host in URL: {url!r}")
    path = split.path or "/"
    if not path.startswith("/"):
        path = "/" + path
    query: list[tuple[str, str]] = []
    if split.query:
        for pair in split.query.split("&"):
            if not pair:
                continue
            key, _, value = pair.partition("=")
            query.append((key, value))
    return ParsedUrl(scheme=split.scheme, host=host, path=path, query=query)


def reassemble(p: ParsedUrl) -> str:
    qs = "&".join(f"{k}={v}" if v else k for k, v in p.query)
    return f"{p.scheme}://{p.host}{p.path}" + (f"?{qs}" if qs else "")


# Separator characters flattened to spaces in feature text.
_FEATURE_SEPARATORS = re.compile(r"[-/=?&]+")


def url_feature_text(p: ParsedUrl) -> str:
    """Classifier feature string from path and query only, host excluded."""
    pieces = [p.path]
    for key, value in p.query:
        pieces.append(key)
        pieces.append(value)
    text = " ".join(pieces)
    text = _FEATURE_SEPARATORS.sub(" ", text)
    return re.sub(r"\s+", " ", text).strip().lower()


def _last_path_segment(path: str) -> str:
    segment = path.rstrip("/").rsplit("/", 1)[-1]
    stem, dot, ext = segment.rpartition(".")
    if dot and ext.isalnum() and len(ext) <= 5:
        return stem
    return segment


def is_seo_title(path: str, min_tokens: int = 3, min_chars: int = 15) -> bool:
    """SEO-style slug test: last segment has >= min_tokens hyphen-separated
    alphabetic tokens whose lengths sum to >= min_chars."""
    tokens = [t for t in _last_path_segment(path).split("-") if t.isalpha()]
    return len(tokens) >= min_tokens and sum(len(t) for t in tokens) >= min_chars


def _host_matches(host: str, names: frozenset[str] | set[str]) -> bool:
    return any(host == n or host.endswith("." + n) for n in names)


def categorize_url(
    p: ParsedUrl,
    news_hosts: set[str] = frozenset(),
    keyword_list: set[str] = frozenset(),
    seo_min_tokens: int = 3,
    seo_min_chars: int = 15,
) -> str:
    """Assign exactly one category by first-match precedence."""
    if any(key in SEARCH_QUERY_KEYS for key, _ in p.query):
        return "web_search"
    if p.host == "wikipedia.org" or p.host.endswith(".wikipedia.org"):
        return "wikipedia"
    if _host_matches(p.host, SOCIAL_HOSTS):
        return "social_media"
    seo = is_seo_title(p.path, seo_min_tokens, seo_min_chars)
    if p.host in news_hosts and not seo:
        return "news_no_seo"
    if seo:
        return "seo_title"
    if any(kw and kw in p.host for kw in keyword_list):
        return "keyworded_domain"
    return "other"


def load_host_list(path) -> set[str]:
    """Read a newline-delimited host/keyword list, lowercased, blanks skipped."""
    out: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            entry = line.strip().lower()
            if entry:
                out.add(entry)
    return out
