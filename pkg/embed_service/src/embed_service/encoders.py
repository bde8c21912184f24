"""Text encoders the service can expose.

Two families: a dependency-free hashing encoder for deterministic test
and capture workflows, and a lazy wrapper around sentence-transformers
for real multilingual models. Both return raw (unnormalized) float64
matrices; normalization is the server's decision.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np


class Encoder(Protocol):
    dim: int
    name: str

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEncoder:
    """Character n-gram feature hashing; same text, same vector, always.

    Not a semantic model. It exists so the protocol, capture files, and
    client integrations can be exercised byte-reproducibly with no
    model download.
    """

    def __init__(self, dim: int = 384, seed: int = 0):
        if dim < 8:
            raise ValueError(f"dim must be >= 8, got {dim}")
        self.dim = dim
        self.seed = seed
        self.name = f"hash:{dim}:{seed}"
        self._prefix = seed.to_bytes(8, "little", signed=True)

    def _accumulate(self, row: np.ndarray, token: bytes) -> None:
        digest = hashlib.sha256(self._prefix + token).digest()
        slot = int.from_bytes(digest[:4], "little") % self.dim
        row[slot] += 1.0 if digest[4] & 1 else -1.0

    def _encode_one(self, text: str) -> np.ndarray:
        row = np.zeros(self.dim, dtype=np.float64)
        data = text.encode("utf-8")
        grams = [data[i : i + n] for n in (1, 2, 3) for i in range(max(len(data) - n + 1, 0))]
        for gram in grams or [b""]:
            self._accumulate(row, gram)
        if not row.any():  # signs cancelled; fall back to a whole-text slot
            self._accumulate(row, b"\x00" + data)
        return row

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self._encode_one(t) for t in texts])


class SentenceTransformerEncoder:
    """sentence-transformers model with its default pooling."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise RuntimeError(
                f"model {model_id!r} needs the sentence-transformers extra: {exc}"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise RuntimeError(f"could not load model {model_id!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.name = model_id

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        out = self._model.encode(
            list(texts),
            convert_to_numpy=True,
            normalize_embeddings=False,
            show_progress_bar=False,
        )
        return np.asarray(out, dtype=np.float64)


def build_encoder(model_spec: str) -> Encoder:
    """"hash[:DIM[:SEED]]" for the built-in encoder, else a model id."""
    if model_spec == "hash" or model_spec.startswith("hash:"):
        parts = model_spec.split(":")
        if len(parts) > 3:
            raise ValueError(f"bad hash encoder spec {model_spec!r}")
        dim = int(parts[1]) if len(parts) > 1 else 384
        seed = int(parts[2]) if len(parts) > 2 else 0
        return HashEncoder(dim=dim, seed=seed)
    return SentenceTransformerEncoder(model_spec)
