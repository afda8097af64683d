import random

import pytest

from webtopic.corpus import (
    FetchConfig,
    WebPage,
    extract_text,
    fetch_page,
    gen_synthetic_corpus,
    load_corpus,
    save_corpus,
)
from webtopic.errors import CorpusError, InputError


class TestFetchPage:
    def test_ok_body(self, stub_server):
        page = fetch_page(f"{stub_server}/ok", FetchConfig())
        assert page.fetch_status == "ok"
        assert page.html == b"<p>hi</p>"
        assert page.http_status == 200

    def test_http_error_code_passthrough(self, stub_server):
        page = fetch_page(f"{stub_server}/missing", FetchConfig())
        assert page.fetch_status == "http_error"
        assert page.http_status == 404
        assert page.html is None

    def test_timeout(self, stub_server):
        page = fetch_page(f"{stub_server}/slow", FetchConfig(timeout=1.0))
        assert page.fetch_status == "timeout"

    def test_body_truncated_at_max_body(self, stub_server):
        cfg = FetchConfig(max_body=1000)
        page = fetch_page(f"{stub_server}/big", cfg)
        assert page.fetch_status == "too_large"
        assert page.html is not None and len(page.html) == 1000

    def test_redirect_cap(self, stub_server):
        page = fetch_page(f"{stub_server}/loop", FetchConfig(max_redirects=3))
        assert page.fetch_status == "http_error"

    def test_connection_refused_is_not_a_crash(self):
        page = fetch_page("http://127.0.0.1:1/none", FetchConfig(timeout=2.0))
        assert page.fetch_status in ("http_error", "timeout")

    @pytest.mark.parametrize("url", ["", "ftp://example.com/x", "not a url", "http://"])
    def test_invalid_url_raises(self, url):
        with pytest.raises((InputError, ValueError)):
            fetch_page(url, FetchConfig())

    def test_bad_config_rejected(self):
        with pytest.raises(InputError):
            FetchConfig(timeout=0)
        with pytest.raises(InputError):
            FetchConfig(max_body=0)


class TestExtractText:
    @pytest.mark.parametrize(
        "html,expected",
        [
            ("<p>Hello <b>world</b></p>", "Hello world"),
            ("<script>x=1</script><p>A</p><p>B</p>", "A\nB"),
            ("", ""),
            ("<style>.c{}</style><div>D</div>", "D"),
            ("<noscript>enable js</noscript><p>real</p>", "real"),
            ("<p>a    b\t c</p>", "a b c"),
            ("<ul><li>one</li><li>two</li></ul>", "one\ntwo"),
            ("<p>x &amp; y</p>", "x & y"),
        ],
    )
    def test_examples(self, html, expected):
        assert extract_text(html.encode()) == expected

    def test_malformed_html_never_raises(self):
        assert isinstance(extract_text(b"<p><b>unclosed <div"), str)
        assert isinstance(extract_text(b"\xff\xfe garbage <p>ok</p>"), str)

    def test_no_tag_chars_or_script_payload(self):
        rng = random.Random(3)
        words = ["alpha", "beta", "gamma", "delta"]
        for _ in range(50):
            parts = ["<script>var secret_payload = 1;</script>"]
            for _ in range(rng.randint(1, 10)):
                tag = rng.choice(["p", "div", "span", "li", "b"])
                parts.append(f"<{tag}>{rng.choice(words)}</{tag}>")
            text = extract_text("".join(parts).encode())
            assert "<" not in text and ">" not in text
            assert "secret_payload" not in text


class TestPersistence:
    def test_round_trip_identity(self, tmp_path):
        pages = gen_synthetic_corpus(["cannabis", "energie"], 5, 20, seed=11)
        path = tmp_path / "corpus.jsonl"
        save_corpus(pages, path)
        loaded = load_corpus(path)
        assert loaded == pages

    def test_round_trip_with_binary_html_and_nones(self, tmp_path):
        pages = [
            WebPage(id="a", url="http://x.de/", topic="t", label="negative",
                    html=bytes(range(256)), text="x", fetch_status="ok"),
            WebPage(id="b", url="http://y.de/", topic="t", label="positive"),
        ]
        path = tmp_path / "c.jsonl"
        save_corpus(pages, path)
        assert load_corpus(path) == pages

    def test_empty_corpus(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        save_corpus([], path)
        assert load_corpus(path) == []

    def test_truncated_line_reports_line_number(self, tmp_path):
        pages = gen_synthetic_corpus(["kw"], 2, 1, seed=1)
        path = tmp_path / "broken.jsonl"
        save_corpus(pages, path)
        content = path.read_text(encoding="utf-8")
        path.write_text(content[:-20], encoding="utf-8")  # cut the final record
        with pytest.raises(CorpusError, match="line 3"):
            load_corpus(path)

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "a", "url": "http://x/", "bogus": 1}\n')
        with pytest.raises(CorpusError, match="line 1"):
            load_corpus(path)


class TestWebPageInvariants:
    def test_text_without_html_rejected(self):
        with pytest.raises(InputError):
            WebPage(id="a", url="http://x/", topic="t", label="positive", text="t")

    def test_augmented_must_be_positive(self):
        with pytest.raises(InputError):
            WebPage(id="a", url="http://x/", topic="t", label="negative",
                    source="augmented")

    def test_bad_enum_values(self):
        with pytest.raises(InputError):
            WebPage(id="a", url="u", topic="t", label="maybe")
        with pytest.raises(InputError):
            WebPage(id="a", url="u", topic="t", label="positive", confidence="medium")


class TestGenSyntheticCorpus:
    def test_positive_urls_and_text_carry_keyword(self):
        pages = gen_synthetic_corpus(["cannabis"], 1, 0, seed=7)
        assert len(pages) == 1
        assert "cannabis" in pages[0].url
        assert "cannabis" in pages[0].text

    def test_determinism(self):
        a = gen_synthetic_corpus(["cannabis"], 10, 40, seed=7)
        b = gen_synthetic_corpus(["cannabis"], 10, 40, seed=7)
        assert a == b
        c = gen_synthetic_corpus(["cannabis"], 10, 40, seed=8)
        assert a != c

    def test_class_ratio(self):
        pages = gen_synthetic_corpus(["kw"], 50, 5000, seed=1)
        n_pos = sum(1 for p in pages if p.label == "positive")
        n_neg = sum(1 for p in pages if p.label == "negative")
        assert (n_pos, n_neg) == (50, 5000)

    def test_negatives_never_contain_literal_keyword(self):
        pages = gen_synthetic_corpus(["cannabis"], 10, 300, seed=5)
        for p in pages:
            if p.label == "negative":
                assert "cannabis" not in p.text
                assert "cannabis" not in p.url

    def test_some_negatives_carry_near_miss(self):
        pages = gen_synthetic_corpus(["cannabis"], 0, 300, seed=5)
        near = "cann" + "bis"  # middle char dropped
        assert any(near in p.text for p in pages)

    def test_text_is_consistent_with_html(self):
        from webtopic.corpus import extract_text

        for p in gen_synthetic_corpus(["kw"], 3, 3, seed=2):
            assert p.text == extract_text(p.html)

    def test_preconditions(self):
        with pytest.raises(InputError):
            gen_synthetic_corpus([], 1, 0, seed=0)
        with pytest.raises(InputError):
            gen_synthetic_corpus(["kw"], -1, 0, seed=0)
