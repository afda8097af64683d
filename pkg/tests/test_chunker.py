import random
from collections import Counter

import pytest

from conftest import make_page
from webtopic.chunker import (
    ChunkerConfig,
    chunk_page,
    split_document,
    tokenize,
)
from webtopic.errors import InputError


class TestTokenize:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("Hello, world", ["Hello", ",", "world"]),
            ("", []),
            ("e-mobilität 2023", ["e", "-", "mobilität", "2023"]),
            ("a  b\n\nc", ["a", "b", "c"]),
        ],
    )
    def test_examples(self, text, expected):
        assert tokenize(text) == expected

    def test_character_class_oracle(self):
        # Independent check: word chars glue together, symbols stand alone,
        # whitespace vanishes.
        rng = random.Random(1)
        alphabet = "abßü1 .,-\n"
        for _ in range(200):
            text = "".join(rng.choices(alphabet, k=rng.randint(0, 40)))
            tokens = tokenize(text)
            rebuilt = "".join(tokens)
            stripped = "".join(ch for ch in text if not ch.isspace())
            assert rebuilt == stripped
            for tok in tokens:
                is_word = all(ch.isalnum() or ch == "_" for ch in tok)
                assert is_word or (len(tok) == 1 and not tok.isspace())


def window_oracle(tokens, max_tokens, overlap):
    """Brute-force sliding window over a token list."""
    stride = max_tokens - overlap
    windows = []
    start = 0
    while True:
        end = min(start + max_tokens, len(tokens))
        windows.append(tokens[start:end])
        if end == len(tokens):
            return windows
        start += stride


class TestSplitDocument:
    def test_fits_in_one_chunk(self):
        text = "zehn kurze worte stehen hier in einem satz zusammen heute"
        assert split_document(text, ChunkerConfig()) == [text]

    def test_empty(self):
        assert split_document("", ChunkerConfig()) == []
        assert split_document("   \n ", ChunkerConfig()) == []

    def test_900_token_window_example(self):
        text = " ".join(f"t{i}" for i in range(1, 901))
        cfg = ChunkerConfig(max_tokens=384, overlap_tokens=64, separators=["\n\n", "\n"])
        chunks = split_document(text, cfg)
        got = [tokenize(c) for c in chunks]
        expected = window_oracle(tokenize(text), 384, 64)
        assert got == expected
        assert got[0][0] == "t1" and got[0][-1] == "t384"
        assert got[1][0] == "t321" and got[1][-1] == "t704"
        assert got[2][0] == "t641" and got[2][-1] == "t900"

    def test_window_oracle_randomized(self):
        rng = random.Random(7)
        for _ in range(25):
            n = rng.randint(1, 300)
            max_tokens = rng.randint(5, 60)
            overlap = rng.randint(0, max_tokens - 1)
            text = " ".join(f"w{i}" for i in range(n))
            cfg = ChunkerConfig(
                max_tokens=max_tokens, overlap_tokens=overlap, separators=[]
            )
            got = [tokenize(c) for c in split_document(text, cfg)]
            assert got == window_oracle(tokenize(text), max_tokens, overlap)

    def test_recursive_path_respects_bound_and_coverage(self):
        rng = random.Random(13)
        for _ in range(30):
            paragraphs = []
            for _ in range(rng.randint(1, 8)):
                sentences = [
                    " ".join(rng.choice(["wort", "text", "satz", "lang"])
                             for _ in range(rng.randint(3, 30)))
                    for _ in range(rng.randint(1, 6))
                ]
                paragraphs.append(". ".join(sentences))
            text = "\n\n".join(paragraphs)
            cfg = ChunkerConfig(max_tokens=rng.randint(10, 50), overlap_tokens=5)
            chunks = split_document(text, cfg)
            counts_in = Counter(tokenize(text))
            counts_out = Counter()
            for c in chunks:
                toks = tokenize(c)
                assert len(toks) <= cfg.max_tokens
                counts_out.update(toks)
            assert all(counts_out[t] >= n for t, n in counts_in.items())

    def test_order_preserved(self):
        text = "\n\n".join(f"absatz nummer {i} " * 8 for i in range(12))
        cfg = ChunkerConfig(max_tokens=30, overlap_tokens=4)
        joined = tokenize("".join(split_document(text, cfg)))
        numbers = [int(t) for t in joined if t.isdigit()]
        assert numbers == sorted(numbers)

    def test_determinism(self):
        text = "ein langer text. " * 100
        cfg = ChunkerConfig(max_tokens=24, overlap_tokens=6)
        assert split_document(text, cfg) == split_document(text, cfg)

    def test_monotone_chunk_count_on_window_path(self):
        text = " ".join(f"t{i}" for i in range(500))
        counts = []
        for max_tokens in (50, 100, 200, 400, 600):
            cfg = ChunkerConfig(max_tokens=max_tokens, overlap_tokens=10, separators=[])
            counts.append(len(split_document(text, cfg)))
        assert counts == sorted(counts, reverse=True)

    def test_small_pieces_merge(self):
        # Six tiny paragraphs fit one 50-token chunk after greedy merging.
        text = "\n\n".join(f"kurz {i}" for i in range(6))
        assert len(split_document(text, ChunkerConfig(max_tokens=50, overlap_tokens=8))) == 1

    def test_config_validation(self):
        with pytest.raises(InputError):
            ChunkerConfig(max_tokens=0)
        with pytest.raises(InputError):
            ChunkerConfig(max_tokens=10, overlap_tokens=10)

    def test_custom_tokenizer_plug_in(self):
        whitespace = lambda s: s.split()
        text = "a-b c-d e-f g-h"
        cfg = ChunkerConfig(max_tokens=2, overlap_tokens=0, separators=[])
        chunks = split_document(text, cfg, tokenizer=whitespace)
        assert [whitespace(c) for c in chunks] == [["a-b", "c-d"], ["e-f", "g-h"]]


class TestChunkPage:
    def test_labels_inherited_positive(self):
        page = make_page(1, label="positive", text="wort " * 900)
        chunks = chunk_page(page, ChunkerConfig(max_tokens=384, overlap_tokens=64))
        assert len(chunks) >= 2
        assert all(c.label == "positive" for c in chunks)
        assert all(c.page_id == page.id for c in chunks)

    def test_labels_inherited_negative(self):
        page = make_page(2, label="negative", text="inhalt hier. " * 50)
        assert all(c.label == "negative" for c in chunk_page(page))

    def test_indexing_in_document_order(self):
        page = make_page(3, text="tok " * 200)
        chunks = chunk_page(page, ChunkerConfig(max_tokens=40, overlap_tokens=8))
        assert [c.index for c in chunks] == list(range(len(chunks)))
        assert all(c.token_count == len(tokenize(c.text)) for c in chunks)

    def test_missing_text_is_error(self):
        page = make_page(4)
        with pytest.raises(InputError, match="no extracted text"):
            chunk_page(page)
