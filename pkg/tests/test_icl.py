import pytest

from conftest import FakeBackend, make_chunk
from webtopic.chunker import ChunkerConfig, chunk_page
from webtopic.corpus import gen_synthetic_corpus
from webtopic.errors import InputError
from webtopic.evaluation import compute_metrics
from webtopic.icl import (
    GenerationParams,
    PromptConfig,
    build_prompt,
    cosine_distance,
    parse_answer,
    render_demonstrator,
    run_icl,
    sample_demonstrators,
)
from webtopic.mock_backend import embed_text
from webtopic.sampling import SplitSpec, build_splits


def labeled_chunks(n_pos=6, n_neg=6):
    chunks = []
    for i in range(n_pos):
        chunks.append(make_chunk(i, text=f"cannabis gesetz beispiel {i}", label="positive"))
    for i in range(n_neg):
        chunks.append(make_chunk(100 + i, text=f"wetter bericht beispiel {i}", label="negative"))
    return chunks


class TestSampleDemonstrators:
    def test_knn_identical_chunk_comes_first(self):
        train = labeled_chunks()
        query = train[3]
        cfg = PromptConfig(topic_description="t", k_demonstrators=3, sampling="knn")
        demos = sample_demonstrators(train, query, cfg, embed=lambda ts: [embed_text(t) for t in ts])
        assert demos[0].text == query.text

    def test_knn_matches_brute_force_cosine_ranking(self):
        train = labeled_chunks(10, 10)
        query = "cannabis debatte heute"
        cfg = PromptConfig(topic_description="t", k_demonstrators=20, sampling="knn")
        embed = lambda ts: [embed_text(t) for t in ts]
        demos = sample_demonstrators(train, make_chunk(0, text=query), cfg, embed=embed)

        qv = embed_text(query)
        want = sorted(
            range(len(train)),
            key=lambda i: (cosine_distance(qv, embed_text(train[i].text)), i),
        )
        assert [c.text for c in demos] == [train[i].text for i in want]

    def test_knn_distances_non_decreasing(self):
        train = labeled_chunks(8, 8)
        cfg = PromptConfig(topic_description="t", k_demonstrators=16, sampling="knn")
        embed = lambda ts: [embed_text(t) for t in ts]
        demos = sample_demonstrators(train, "cannabis im bundestag", cfg, embed=embed)
        qv = embed_text("cannabis im bundestag")
        dists = [cosine_distance(qv, embed_text(c.text)) for c in demos]
        assert dists == sorted(dists)

    def test_balanced_counts(self):
        cfg = PromptConfig(topic_description="t", k_demonstrators=4, sampling="balanced")
        demos = sample_demonstrators(labeled_chunks(), "query", cfg)
        labels = [c.label for c in demos]
        assert labels.count("positive") == 2 and labels.count("negative") == 2

    def test_balanced_odd_k_rounds_positive_up(self):
        cfg = PromptConfig(topic_description="t", k_demonstrators=5, sampling="balanced")
        demos = sample_demonstrators(labeled_chunks(), "query", cfg)
        labels = [c.label for c in demos]
        assert labels.count("positive") == 3 and labels.count("negative") == 2

    def test_balanced_missing_class_errors(self):
        only_pos = [make_chunk(i, label="positive") for i in range(6)]
        cfg = PromptConfig(topic_description="t", k_demonstrators=4, sampling="balanced")
        with pytest.raises(InputError):
            sample_demonstrators(only_pos, "q", cfg)

    def test_random_deterministic_per_seed_and_query(self):
        train = labeled_chunks()
        cfg = PromptConfig(topic_description="t", k_demonstrators=4, seed=5)
        a = sample_demonstrators(train, "eine anfrage", cfg)
        b = sample_demonstrators(train, "eine anfrage", cfg)
        assert [c.text for c in a] == [c.text for c in b]
        other_seed = PromptConfig(topic_description="t", k_demonstrators=4, seed=6)
        c = sample_demonstrators(train, "eine anfrage", other_seed)
        assert [x.text for x in a] != [x.text for x in c]

    def test_k_zero_and_k_too_large(self):
        train = labeled_chunks(2, 2)
        cfg0 = PromptConfig(topic_description="t", k_demonstrators=0)
        assert sample_demonstrators(train, "q", cfg0) == []
        cfg9 = PromptConfig(topic_description="t", k_demonstrators=9)
        with pytest.raises(InputError):
            sample_demonstrators(train, "q", cfg9)


class TestBuildPrompt:
    def test_zero_shot_is_instruction_plus_query(self):
        cfg = PromptConfig(topic_description="Cannabis Gesetz", k_demonstrators=0)
        prompt = build_prompt("ein text", [], cfg)
        assert "Cannabis Gesetz" in prompt
        assert prompt.endswith("Text: ein text\nAnswer:")
        assert "Answer: Yes" not in prompt and "Answer: No" not in prompt

    def test_two_demonstrators_rendered_in_order(self):
        cfg = PromptConfig(topic_description="t", k_demonstrators=2)
        demos = [
            make_chunk(0, text="erster beleg", label="positive"),
            make_chunk(1, text="zweiter beleg", label="negative"),
        ]
        prompt = build_prompt("die frage", demos, cfg)
        assert prompt.index("erster beleg") < prompt.index("zweiter beleg")
        assert "Text: erster beleg\nAnswer: Yes" in prompt
        assert "Text: zweiter beleg\nAnswer: No" in prompt
        assert prompt.rstrip().endswith("Answer:")

    def test_literal_no_in_text_survives(self):
        demo = make_chunk(0, text='sie sagte "No" und ging', label="positive")
        cfg = PromptConfig(topic_description="t", k_demonstrators=1)
        prompt = build_prompt("query", [demo], cfg)
        assert 'sie sagte "No" und ging' in prompt

    def test_missing_placeholder_rejected(self):
        with pytest.raises(InputError):
            PromptConfig(topic_description="t", template="{instruction}{input}")

    def test_byte_identical_determinism(self):
        train = labeled_chunks()
        cfg = PromptConfig(topic_description="thema", k_demonstrators=3, seed=11)
        demos1 = sample_demonstrators(train, "der text", cfg)
        demos2 = sample_demonstrators(train, "der text", cfg)
        assert build_prompt("der text", demos1, cfg) == build_prompt("der text", demos2, cfg)


class TestParseAnswer:
    @pytest.mark.parametrize(
        "raw,value",
        [
            ("Yes, this page covers the law.", "positive"),
            ("NO", "negative"),
            ("It depends.", "unparseable"),
            ("  yes", "positive"),
            ("No - not related.", "negative"),
            ("", "unparseable"),
            ("42", "unparseable"),
            ("\nYES!\n", "positive"),
        ],
    )
    def test_examples(self, raw, value):
        answer = parse_answer(raw)
        assert answer.value == value
        assert answer.raw == raw

    def test_round_trips_rendered_demonstrators(self):
        for chunk in labeled_chunks():
            rendered = render_demonstrator(chunk)
            answer_line = rendered.rsplit("Answer:", 1)[1]
            assert parse_answer(answer_line).value == chunk.label


def yes_backend(msg):
    return {"id": msg["id"], "ok": True, "text": "Yes.", "params": {}}


def no_backend(msg):
    return {"id": msg["id"], "ok": True, "text": "No.", "params": {}}


class TestRunIcl:
    def _eval_chunks(self):
        chunks = []
        for i in range(4):
            chunks.append(make_chunk(i, text=f"cannabis inhalt {i}", label="positive",
                                     page_id=f"pos{i}"))
        for i in range(4):
            chunks.append(make_chunk(10 + i, text=f"wetter inhalt {i}", label="negative",
                                     page_id=f"neg{i}"))
        return chunks

    def test_always_yes_gives_recall_one(self):
        cfg = PromptConfig(topic_description="t", k_demonstrators=0)
        result = run_icl(self._eval_chunks(), [], cfg, GenerationParams(),
                         FakeBackend(yes_backend))
        assert all(d.predicted == "positive" for d in result.documents)

    def test_always_no_gives_all_negative(self):
        cfg = PromptConfig(topic_description="t", k_demonstrators=0)
        result = run_icl(self._eval_chunks(), [], cfg, GenerationParams(),
                         FakeBackend(no_backend))
        assert all(d.predicted == "negative" for d in result.documents)

    def test_keyword_echo_few_shot_reaches_f1_one(self, keyword_backend):
        corpus = gen_synthetic_corpus(["cannabis"], 20, 200, seed=3)
        by_id = {p.id: p for p in corpus}
        splits = build_splits(corpus, SplitSpec(seed=3))
        cfg_chunk = ChunkerConfig()
        train_chunks = [
            c for pid in splits["train"].page_ids
            for c in chunk_page(by_id[pid], cfg_chunk)
        ]
        eval_chunks = [
            c for pid in splits["test"].page_ids
            for c in chunk_page(by_id[pid], cfg_chunk)
        ]
        cfg = PromptConfig(topic_description="cannabis politik", k_demonstrators=4, seed=1)
        result = run_icl(eval_chunks, train_chunks, cfg, GenerationParams(), keyword_backend)
        gold = {pid: by_id[pid].label for pid in splits["test"].page_ids}
        pairs = [(gold[d.page_id], d.predicted) for d in result.documents]
        metrics = compute_metrics(pairs)
        assert metrics.f1 == 1.0
        assert result.n_unparseable == 0

    def test_generation_params_sent_verbatim(self, keyword_backend):
        cfg = PromptConfig(topic_description="t", k_demonstrators=0)
        gen = GenerationParams(temperature=0.3, top_k=50, top_p=0.95)
        run_icl(self._eval_chunks()[:2], [], cfg, gen, keyword_backend)
        generates = [r for r in keyword_backend.requests if r["op"] == "generate"]
        assert generates
        for req in generates:
            assert req["temperature"] == 0.3
            assert req["top_k"] == 50
            assert req["top_p"] == 0.95

    def test_unparseable_counted_never_positive(self):
        def rambling(msg):
            return {"id": msg["id"], "ok": True, "text": "Hmm, schwer zu sagen"}

        cfg = PromptConfig(topic_description="t", k_demonstrators=0)
        result = run_icl(self._eval_chunks(), [], cfg, GenerationParams(),
                         FakeBackend(rambling))
        assert all(d.predicted == "negative" for d in result.documents)
        assert result.n_unparseable == len(self._eval_chunks())

    def test_transport_errors_retried_then_recorded(self):
        calls = {"n": 0}

        class FlakyBackend(FakeBackend):
            def request(self, op, payload):
                calls["n"] += 1
                from webtopic.errors import TransportError

                raise TransportError("down")

        cfg = PromptConfig(topic_description="t", k_demonstrators=0)
        chunks = self._eval_chunks()[:1]
        result = run_icl(chunks, [], cfg, GenerationParams(),
                         FlakyBackend(lambda m: m), max_retries=2)
        assert calls["n"] == 3  # initial try + 2 retries
        assert result.n_failed == 1
        assert result.documents[0].predicted == "negative"

    def test_flaky_backend_recovers_within_retries(self):
        state = {"n": 0}

        def flaky(msg):
            state["n"] += 1
            if state["n"] == 1:
                raise_transport()
            return {"id": msg["id"], "ok": True, "text": "Yes."}

        def raise_transport():
            from webtopic.errors import TransportError

            raise TransportError("blip")

        class Flaky(FakeBackend):
            def request(self, op, payload):
                self._next_id += 1
                msg = {"id": self._next_id, "op": op, **payload}
                return flaky(msg)

        cfg = PromptConfig(topic_description="t", k_demonstrators=0)
        result = run_icl(self._eval_chunks()[:1], [], cfg, GenerationParams(), Flaky(flaky))
        assert result.documents[0].predicted == "positive"
        assert result.n_failed == 0


class TestGenerationParams:
    def test_defaults(self):
        gen = GenerationParams()
        assert (gen.temperature, gen.top_k, gen.top_p) == (0.3, 50, 0.95)

    def test_validation(self):
        with pytest.raises(InputError):
            GenerationParams(temperature=0)
        with pytest.raises(InputError):
            GenerationParams(top_p=0)
        with pytest.raises(InputError):
            GenerationParams(top_k=0)
