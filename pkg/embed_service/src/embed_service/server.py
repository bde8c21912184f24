"""Newline-delimited JSON embedding service.

One request per line: {"id": <any>, "texts": ["...", ...]}. One response
line per request, in order: {"id": <echoed>, "vectors": [[...], ...],
"dim": <int>} on success, {"id": <echoed>, "error": "..."} otherwise.
Malformed input produces an error response, never a dead process.
"""

from __future__ import annotations

import json
import socketserver
import sys
from dataclasses import dataclass

import numpy as np

from .encoders import Encoder


@dataclass(frozen=True)
class ServiceConfig:
    model: str = "hash:384:0"
    batch_size: int = 32
    listen: str = "stdio"  # "stdio" or "tcp://HOST:PORT"
    normalize: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _error(request_id, message: str) -> dict:
    return {"id": request_id, "error": message}


def _normalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.sqrt((mat * mat).sum(axis=1))
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise ValueError("encoder produced a zero or non-finite vector")
    return mat / norms[:, None]


def handle_request(line: str, encoder: Encoder, config: ServiceConfig) -> dict:
    """One request line to one response object; never raises on bad input."""
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        return _error(None, f"request is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        return _error(None, "request must be a JSON object")
    request_id = payload.get("id")
    texts = payload.get("texts")
    if not isinstance(texts, list):
        return _error(request_id, 'request needs a "texts" array')
    if not texts:
        return _error(request_id, "refusing empty batch")
    if not all(isinstance(t, str) for t in texts):
        return _error(request_id, "texts must all be strings")
    if len(texts) > config.batch_size:
        return _error(
            request_id,
            f"batch of {len(texts)} exceeds configured maximum {config.batch_size}",
        )
    try:
        vectors = encoder.encode(texts)
        if config.normalize:
            vectors = _normalize_rows(vectors)
    except Exception as exc:  # encode failures must not kill the session
        return _error(request_id, f"encoding failed: {exc}")
    return {"id": request_id, "vectors": vectors.tolist(), "dim": encoder.dim}


def _respond(stream, response: dict) -> None:
    stream.write(json.dumps(response, ensure_ascii=False) + "\n")
    stream.flush()


def serve_stdio(encoder: Encoder, config: ServiceConfig) -> int:
    for line in sys.stdin:
        if not line.strip():
            continue
        _respond(sys.stdout, handle_request(line, encoder, config))
    return 0


def serve_tcp(encoder: Encoder, config: ServiceConfig, host: str, port: int) -> int:
    service = (encoder, config)

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            enc, cfg = service
            reader = self.rfile
            writer = _Utf8Writer(self.wfile)
            for raw in reader:
                line = raw.decode("utf-8", errors="replace")
                if not line.strip():
                    continue
                _respond(writer, handle_request(line, enc, cfg))

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as srv:
        actual_host, actual_port = srv.server_address[:2]
        print(f"listening on {actual_host}:{actual_port}", file=sys.stderr, flush=True)
        srv.serve_forever()
    return 0


class _Utf8Writer:
    """Text facade over the handler's binary wfile."""

    def __init__(self, wfile):
        self._wfile = wfile

    def write(self, text: str) -> None:
        self._wfile.write(text.encode("utf-8"))

    def flush(self) -> None:
        self._wfile.flush()
