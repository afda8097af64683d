import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from webtopic.chunker import Chunk
from webtopic.corpus import WebPage


MOCK_BACKEND_ARGV = [sys.executable, "-m", "webtopic.mock_backend"]


def make_page(
    i=0, label="negative", url=None, text=None, confidence="high", source="panel",
    topic="t",
):
    """Small WebPage factory for tests; html mirrors text when text given."""
    if url is None:
        url = f"https://site{i}.example/page-{i}"
    html = text.encode("utf-8") if text is not None else None
    return WebPage(
        id=f"pg{i:05d}", url=url, topic=topic, label=label,
        confidence=confidence, source=source, html=html, text=text,
        fetch_status="ok" if html is not None else "not_fetched",
    )


def make_chunk(i=0, text="some text", label="negative", page_id=None, index=0):
    return Chunk(
        page_id=page_id or f"pg{i:05d}", index=index, text=text,
        token_count=len(text.split()), label=label,
    )


class _StubHandler(BaseHTTPRequestHandler):
    """Scriptable test server: behavior keyed on the request path."""

    def do_GET(self):
        if self.path.startswith("/ok"):
            body = b"<p>hi</p>"
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        elif self.path.startswith("/missing"):
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()
        elif self.path.startswith("/slow"):
            time.sleep(60)
        elif self.path.startswith("/big"):
            body = b"x" * 100_000
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        elif self.path.startswith("/loop"):
            self.send_response(302)
            self.send_header("Location", "/loop")
            self.send_header("Content-Length", "0")
            self.end_headers()
        else:
            self.send_response(204)
            self.send_header("Content-Length", "0")
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture(scope="session")
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


class FakeBackend:
    """In-process Backend test double with a scriptable handler."""

    def __init__(self, handler):
        self.handler = handler
        self.requests = []
        self._next_id = 0

    def request(self, op, payload):
        from webtopic.errors import BackendError, ProtocolError

        self._next_id += 1
        message = {"id": self._next_id, "op": op, **payload}
        self.requests.append(message)
        reply = self.handler(message)
        if reply.get("id") != self._next_id:
            raise ProtocolError("id mismatch")
        if not reply.get("ok"):
            raise BackendError(str(reply.get("error", "failure")))
        return reply

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@pytest.fixture
def keyword_backend():
    """FakeBackend scoring/answering on the literal keyword 'cannabis'."""
    from webtopic.mock_backend import MockModelStore, handle_request

    store = MockModelStore(keywords=["cannabis"])
    return FakeBackend(lambda msg: handle_request(store, msg))
