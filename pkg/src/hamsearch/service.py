"""Minimal JSON-over-HTTP query service.

POST /search {"code": <hex>, "radius": r, "strategy"?: name}
POST /knn    {"code": <hex>, "k": k, "strategy"?: name}
GET  /stats

Handlers run concurrently against the immutable engine; the service
never mutates engine state, so restarts are idempotent given the same
index files. Built on the standard library's threading HTTP server —
the engine itself is the product here, not the web stack.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .engine import SearchEngine, SearchStrategy, result_to_document
from .errors import EngineNotReadyError, HexCodeError
from .store import parse_code_hex

DEFAULT_STRATEGY = SearchStrategy.FILTERED_PERMUTED


def _parse_request(engine: SearchEngine, body: dict, mode: str):
    if not isinstance(body, dict):
        raise _BadRequest("request body must be a JSON object")
    if "radius" in body and "k" in body:
        raise _BadRequest("give either 'radius' or 'k', not both")
    needed = "radius" if mode == "search" else "k"
    if needed not in body:
        raise _BadRequest(f"missing '{needed}'")
    other = "k" if needed == "radius" else "radius"
    if other in body:
        raise _BadRequest(f"'{other}' does not belong in a /{mode} request")
    amount = body[needed]
    if not isinstance(amount, int) or isinstance(amount, bool):
        raise _BadRequest(f"'{needed}' must be an integer")
    code_hex = body.get("code")
    if not isinstance(code_hex, str):
        raise _BadRequest("missing hex 'code'")
    try:
        query = parse_code_hex(code_hex, engine.nbits)
    except HexCodeError as exc:
        raise _BadRequest(str(exc)) from exc
    strategy_name = body.get("strategy", DEFAULT_STRATEGY.value)
    try:
        strategy = SearchStrategy(strategy_name)
    except ValueError:
        raise _BadRequest(
            f"unknown strategy {strategy_name!r}; one of "
            f"{[s.value for s in SearchStrategy]}"
        ) from None
    return query, amount, strategy


class _BadRequest(Exception):
    pass


def handle_search(engine: SearchEngine, body: dict):
    """(status, payload) for a radius query; pure function for tests."""
    try:
        query, radius, strategy = _parse_request(engine, body, "search")
        result = engine.r_neighbor_search(strategy, query, radius)
    except _BadRequest as exc:
        return 400, {"error": str(exc)}
    except ValueError as exc:
        return 400, {"error": str(exc)}
    except EngineNotReadyError as exc:
        return 503, {"error": str(exc)}
    return 200, result_to_document(result)


def handle_knn(engine: SearchEngine, body: dict):
    try:
        query, k, strategy = _parse_request(engine, body, "knn")
        result = engine.knn_search(strategy, query, k)
    except _BadRequest as exc:
        return 400, {"error": str(exc)}
    except ValueError as exc:
        return 400, {"error": str(exc)}
    except EngineNotReadyError as exc:
        return 503, {"error": str(exc)}
    return 200, result_to_document(result)


def handle_stats(engine: SearchEngine):
    layout = None
    for idx in (engine.permuted_index, engine.plain_index):
        if idx is not None:
            layout = idx.layout
            break
    return 200, {
        "m": engine.nbits,
        "n": len(engine.dataset),
        "s": None if layout is None else layout.segment_count,
        "w": None if layout is None else layout.segment_width,
        "permuted": engine.permuted_index is not None,
    }


class _Handler(BaseHTTPRequestHandler):
    def _reply(self, status: int, payload: dict) -> None:
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_POST(self):
        engine = self.server.engine
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._reply(400, {"error": "request body is not valid JSON"})
            return
        if self.path == "/search":
            self._reply(*handle_search(engine, body))
        elif self.path == "/knn":
            self._reply(*handle_knn(engine, body))
        else:
            self._reply(404, {"error": f"no such endpoint {self.path}"})

    def do_GET(self):
        if self.path == "/stats":
            self._reply(*handle_stats(self.server.engine))
        else:
            self._reply(404, {"error": f"no such endpoint {self.path}"})

    def log_message(self, fmt, *args):
        pass  # keep the measurement path quiet


class SearchServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, engine: SearchEngine):
        super().__init__(address, _Handler)
        self.engine = engine


def serve(engine: SearchEngine, host: str, port: int) -> SearchServer:
    """Bind a server (port 0 picks a free port); caller runs serve_forever."""
    return SearchServer((host, port), engine)
