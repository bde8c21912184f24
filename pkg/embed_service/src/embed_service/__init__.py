"""Embedding service speaking newline-delimited JSON over stdio or TCP."""

from .encoders import Encoder, HashEncoder, SentenceTransformerEncoder, build_encoder
from .server import ServiceConfig, handle_request, serve_stdio, serve_tcp

__all__ = [
    "Encoder",
    "HashEncoder",
    "SentenceTransformerEncoder",
    "ServiceConfig",
    "build_encoder",
    "handle_request",
    "serve_stdio",
    "serve_tcp",
]

__version__ = "0.1.0"
