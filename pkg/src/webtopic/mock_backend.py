"""Deterministic mock backend speaking the full wire protocol.

Stands in for a real model runtime in tests and desk-scale runs: train
derives keyword rules from the labeled examples (tokens frequent in
positives and rare in negatives), score answers 0.9/0.1 on keyword presence,
embed returns a hashed bag-of-words vector, and generate answers Yes/No by
checking the query section of the prompt (the text after the last "Text:"
marker, so demonstrator texts cannot leak into the decision).

Run it over stdio (default) or HTTP:

    python -m webtopic.mock_backend --keyword cannabis
    python -m webtopic.mock_backend --keyword cannabis --http 9009
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

EMBED_DIM = 32

_WORD_RE = re.compile(r"\w+", re.UNICODE)


class MockModelStore:
    def __init__(self, keywords: list[str] | None = None, state_path: str | None = None):
        self.models: dict[str, list[str]] = {}
        self.default_keywords = [k.lower() for k in (keywords or [])]
        if self.default_keywords:
            self.models["kw"] = list(self.default_keywords)
        self._counter = 0
        self.state_path = state_path
        if state_path:
            try:
                with open(state_path, "r", encoding="utf-8") as fh:
                    state = json.load(fh)
                self.models.update(state["models"])
                self._counter = state["counter"]
            except FileNotFoundError:
                pass

    def _save_state(self) -> None:
        if self.state_path:
            with open(self.state_path, "w", encoding="utf-8") as fh:
                json.dump({"models": self.models, "counter": self._counter}, fh)

    def train(self, examples: list[dict], config: dict) -> str:
        pos_docs = [e["text"].lower() for e in examples if e["label"] == "positive"]
        neg_docs = [e["text"].lower() for e in examples if e["label"] == "negative"]
        vocab = {w for d in pos_docs for w in _WORD_RE.findall(d)}
        keywords = []
        for word in sorted(vocab):
            if len(word) < 4:  # short tokens make terrible substring rules
                continue
            in_pos = sum(1 for d in pos_docs if word in _WORD_RE.findall(d))
            in_neg = sum(1 for d in neg_docs if word in _WORD_RE.findall(d))
            if in_pos >= 0.5 * len(pos_docs) and in_neg <= 0.05 * max(len(neg_docs), 1):
                keywords.append(word)
        if not keywords:
            keywords = list(self.default_keywords)
        self._counter += 1
        model_id = f"m{self._counter}"
        self.models[model_id] = keywords
        self._save_state()
        return model_id

    def score_text(self, model_id: str, text: str) -> float:
        lowered = text.lower()
        return 0.9 if any(k in lowered for k in self.models[model_id]) else 0.1

    def generate_keywords(self) -> list[str]:
        if self.default_keywords:
            return self.default_keywords
        if self.models:
            return self.models[f"m{self._counter}"] if self._counter else []
        return []


def embed_text(text: str) -> list[float]:
    """Hashed bag-of-words, L2-normalized; identical texts embed identically."""
    vec = [0.0] * EMBED_DIM
    for word in _WORD_RE.findall(text.lower()):
        digest = hashlib.sha256(word.encode("utf-8")).digest()
        slot = digest[0] % EMBED_DIM
        sign = 1.0 if digest[1] % 2 == 0 else -1.0
        vec[slot] += sign
    norm = sum(x * x for x in vec) ** 0.5
    if norm == 0:
        vec[0] = 1.0
        return vec
    return [x / norm for x in vec]


def query_section(prompt: str) -> str:
    """The trailing incomplete example: text after the final input marker."""
    idx = prompt.rfind("Text:")
    tail = prompt[idx + len("Text:") :] if idx >= 0 else prompt
    answer_idx = tail.rfind("\nAnswer:")
    return tail[:answer_idx] if answer_idx >= 0 else tail


def handle_request(store: MockModelStore, message: dict) -> dict:
    req_id = message.get("id")
    op = message.get("op")
    try:
        if op == "info":
            return {
                "id": req_id, "ok": True, "model": "mock-keyword",
                "context_size": 512, "num_labels": 2,
            }
        if op == "train":
            config = message.get("config", {})
            model_id = store.train(message.get("examples", []), config)
            return {"id": req_id, "ok": True, "model_id": model_id, "config": config}
        if op == "score":
            model_id = message["model_id"]
            if model_id not in store.models:
                return {"id": req_id, "ok": False, "error": f"unknown model {model_id!r}"}
            scores = [store.score_text(model_id, t) for t in message["texts"]]
            return {"id": req_id, "ok": True, "scores": scores}
        if op == "embed":
            return {
                "id": req_id, "ok": True,
                "vectors": [embed_text(t) for t in message["texts"]],
            }
        if op == "generate":
            section = query_section(message["prompt"]).lower()
            keywords = store.generate_keywords()
            text = "Yes." if any(k in section for k in keywords) else "No."
            params = {
                "temperature": message.get("temperature"),
                "top_k": message.get("top_k"),
                "top_p": message.get("top_p"),
            }
            return {"id": req_id, "ok": True, "text": text, "params": params}
        return {"id": req_id, "ok": False, "error": f"unknown op {op!r}"}
    except (KeyError, TypeError, ValueError) as exc:
        return {"id": req_id, "ok": False, "error": f"bad request: {exc}"}


def serve_stdio(store: MockModelStore) -> None:
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            reply = {"id": None, "ok": False, "error": "request is not JSON"}
        else:
            reply = handle_request(store, message)
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


def serve_http(store: MockModelStore, port: int) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length)
            try:
                message = json.loads(body)
            except json.JSONDecodeError:
                reply = {"id": None, "ok": False, "error": "request is not JSON"}
            else:
                if not self.path.startswith("/v1/"):
                    reply = {
                        "id": message.get("id"), "ok": False,
                        "error": f"bad path {self.path!r}",
                    }
                else:
                    message.setdefault("op", self.path[len("/v1/") :])
                    reply = handle_request(store, message)
            payload = json.dumps(reply).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
    return server


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="mock protocol backend")
    parser.add_argument("--keyword", action="append", default=[])
    parser.add_argument("--http", type=int, metavar="PORT")
    parser.add_argument("--state", metavar="PATH",
                        help="JSON file persisting trained models across runs")
    args = parser.parse_args(argv)
    store = MockModelStore(keywords=args.keyword, state_path=args.state)
    if args.http:
        server = serve_http(store, args.http)
        server.serve_forever()
    else:
        serve_stdio(store)
    return 0


if __name__ == "__main__":
    sys.exit(main())
