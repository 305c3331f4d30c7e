import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class ScriptedServer:
    """Local HTTP server whose responses are scripted per path.

    ``routes[path]`` is either a (status, body) pair served forever, or a
    list of pairs consumed one per request (the last repeats). Built-in
    paths: /redirect-loop, /chain/<n> (n hops then 200), /sleep/<ms>.
    """

    def __init__(self):
        self.routes = {}
        self.hits = {}
        self._lock = threading.Lock()

        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"  # keep-alive; Content-Length always set

            def log_message(self, *args):
                pass

            def do_GET(self):
                server._handle(self)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.port = self.httpd.server_address[1]
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def url(self, path):
        return f"http://127.0.0.1:{self.port}{path}"

    def set(self, path, status, body=b"ok", content_type="text/html"):
        self.routes[path] = (status, body, content_type)

    def set_sequence(self, path, pairs):
        self.routes[path] = list(pairs)

    def set_page(self, path, html):
        if isinstance(html, str):
            html = html.encode("utf-8")
        self.set(path, 200, html)

    def _handle(self, handler):
        path = handler.path.split("?", 1)[0]
        with self._lock:
            self.hits[path] = self.hits.get(path, 0) + 1
        if path == "/redirect-loop":
            self._redirect(handler, self.url("/redirect-loop"))
            return
        if path.startswith("/chain/"):
            hops = int(path.rsplit("/", 1)[1])
            if hops <= 0:
                self._respond(handler, 200, b"end of chain", "text/html")
            else:
                self._redirect(handler, self.url(f"/chain/{hops - 1}"))
            return
        if path.startswith("/sleep/"):
            time.sleep(int(path.rsplit("/", 1)[1]) / 1000.0)
            self._respond(handler, 200, b"slept", "text/html")
            return
        route = self.routes.get(path)
        if route is None:
            self._respond(handler, 404, b"no such fixture page", "text/html")
            return
        if isinstance(route, list):
            with self._lock:
                entry = route.pop(0) if len(route) > 1 else route[0]
            status, body = entry[0], entry[1]
            ctype = entry[2] if len(entry) > 2 else "text/html"
        else:
            status, body, ctype = route
        self._respond(handler, status, body, ctype)

    @staticmethod
    def _redirect(handler, location):
        handler.send_response(302)
        handler.send_header("Location", location)
        handler.send_header("Content-Length", "0")
        handler.end_headers()

    @staticmethod
    def _respond(handler, status, body, content_type):
        if isinstance(body, str):
            body = body.encode("utf-8")
        handler.send_response(status)
        handler.send_header("Content-Type", content_type)
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        handler.wfile.write(body)

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def server():
    srv = ScriptedServer()
    yield srv
    srv.close()


@pytest.fixture(scope="session")
def shared_server():
    srv = ScriptedServer()
    yield srv
    srv.close()


def write_ndjson_fixture(directory, query_id, items):
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{query_id}.ndjson"
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item) + "\n")
    return path
