import random
import string

import pytest

from webtopic.errors import InputError
from webtopic.urltools import (
    CATEGORIES,
    ParsedUrl,
    categorize_url,
    is_seo_title,
    load_host_list,
    parse_url,
    reassemble,
    url_feature_text,
)


class TestParseUrl:
    def test_plain_path_url(self):
        p = parse_url("http://gutefrage.net/frage/chef-zahlt-bar-auf-die-hand-legal")
        assert p.host == "gutefrage.net"
        assert p.path == "/frage/chef-zahlt-bar-auf-die-hand-legal"
        assert p.query == []

    def test_root_path(self):
        p = parse_url("https://example.com/")
        assert p.path == "/"
        assert p.query == []

    def test_missing_scheme_defaults_http(self):
        p = parse_url("google.com/search?q=value")
        assert p.scheme == "http"
        assert p.host == "google.com"
        assert p.path == "/search"
        assert p.query == [("q", "value")]

    def test_host_lowercased_query_order_kept(self):
        p = parse_url("https://Example.COM/A?b=1&a=2&b=3")
        assert p.host == "example.com"
        assert p.query == [("b", "1"), ("a", "2"), ("b", "3")]

    def test_percent_encoding_preserved(self):
        p = parse_url("http://x.de/pfad%20eins?q=a%26b")
        assert p.path == "/pfad%20eins"
        assert p.query == [("q", "a%26b")]

    def test_no_path_becomes_slash(self):
        assert parse_url("http://x.de").path == "/"

    @pytest.mark.parametrize("bad", ["", "   ", "http://"])
    def test_unparseable(self, bad):
        with pytest.raises(InputError):
            parse_url(bad)

    def test_parse_reassemble_idempotent(self):
        urls = [
            "http://x.de/a-b?q=1&p=2",
            "https://y.com/",
            "http://z.net/pfad%20x?flag",
            "a.de/b/c.html",
        ]
        for url in urls:
            once = parse_url(url)
            twice = parse_url(reassemble(once))
            assert parse_url(reassemble(twice)) == twice
            assert twice == once


class TestUrlFeatureText:
    def test_seo_path(self):
        p = ParsedUrl("http", "example.com", "/germany-legalises-cannabis", [])
        assert url_feature_text(p) == "germany legalises cannabis"

    def test_root_is_empty(self):
        assert url_feature_text(ParsedUrl("http", "x.de", "/", [])) == ""

    def test_query_flattened(self):
        p = ParsedUrl("http", "x.de", "/search", [("q", "solar")])
        assert url_feature_text(p) == "search q solar"

    def test_lowercased(self):
        p = ParsedUrl("http", "x.de", "/GROSS-Klein", [])
        assert url_feature_text(p) == "gross klein"

    def test_host_never_in_output(self):
        rng = random.Random(9)
        for _ in range(100):
            host_token = "".join(rng.choices(string.ascii_lowercase, k=12))
            host = f"{host_token}.example"
            path_words = [
                "".join(rng.choices(string.ascii_lowercase, k=rng.randint(3, 8)))
                for _ in range(rng.randint(0, 4))
            ]
            query = [("q", "".join(rng.choices(string.ascii_lowercase, k=5)))]
            p = ParsedUrl("http", host, "/" + "-".join(path_words), query)
            assert host_token not in url_feature_text(p)


class TestCategorizeUrl:
    def test_web_search(self):
        assert categorize_url(parse_url("google.com/search?q=value")) == "web_search"

    def test_seo_title(self):
        p = parse_url("http://example.com/germany-legalises-cannabis")
        assert categorize_url(p) == "seo_title"

    def test_wikipedia(self):
        p = parse_url("https://de.wikipedia.org/wiki/Cannabis")
        assert categorize_url(p) == "wikipedia"

    def test_social_media_with_subdomain(self):
        assert categorize_url(parse_url("https://m.facebook.com/irgendwas")) == "social_media"

    def test_news_without_seo_title(self):
        p = parse_url("https://zeitung.de/politik/artikel123.html")
        assert categorize_url(p, news_hosts={"zeitung.de"}) == "news_no_seo"

    def test_news_host_with_seo_path_is_seo(self):
        p = parse_url("https://zeitung.de/cannabis-gesetz-beschlossen-im-bundestag")
        assert categorize_url(p, news_hosts={"zeitung.de"}) == "seo_title"

    def test_keyworded_domain(self):
        p = parse_url("http://example-cannabis-info.com/shop")
        assert categorize_url(p, keyword_list={"cannabis"}) == "keyworded_domain"

    def test_other(self):
        assert categorize_url(parse_url("http://x.de/a")) == "other"

    def test_search_beats_wikipedia(self):
        p = parse_url("https://de.wikipedia.org/w/index.php?search=cannabis")
        assert categorize_url(p) == "web_search"

    def test_total_and_deterministic(self):
        rng = random.Random(4)
        hosts = ["a.de", "b.com", "de.wikipedia.org", "m.facebook.com", "news.de"]
        for _ in range(200):
            host = rng.choice(hosts)
            path = "/" + "-".join(
                "".join(rng.choices(string.ascii_lowercase, k=rng.randint(1, 9)))
                for _ in range(rng.randint(0, 5))
            )
            query = [("q", "x")] if rng.random() < 0.3 else []
            p = ParsedUrl("http", host, path, query)
            c1 = categorize_url(p, news_hosts={"news.de"}, keyword_list={"solar"})
            c2 = categorize_url(p, news_hosts={"news.de"}, keyword_list={"solar"})
            assert c1 == c2
            assert c1 in CATEGORIES


class TestSeoHeuristic:
    @pytest.mark.parametrize(
        "path,expected",
        [
            ("/germany-legalises-cannabis", True),
            ("/warum-eine-neue-gasheizung-noch-sinn-macht", True),
            ("/a-b-c", False),  # three tokens but too short
            ("/wiki/Cannabis", False),
            ("/artikel-2023-update", False),  # only two alphabetic tokens
            ("/novelle-eeg-gesetz-2023-beschlossen", True),
            ("/cannabis-gesetz-beschlossen.html", True),  # extension stripped
            ("/", False),
        ],
    )
    def test_cases(self, path, expected):
        assert is_seo_title(path) is expected

    def test_thresholds_configurable(self):
        assert is_seo_title("/a-b-c", min_tokens=3, min_chars=3)
        assert not is_seo_title("/a-b-c", min_tokens=4, min_chars=3)


def test_load_host_list(tmp_path):
    path = tmp_path / "hosts.txt"
    path.write_text("Zeitung.de\n\n  spiegel.de  \n", encoding="utf-8")
    assert load_host_list(path) == {"zeitung.de", "spiegel.de"}
