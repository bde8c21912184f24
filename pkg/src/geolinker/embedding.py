"""Embedding providers, vector math, and the external-service client.

Three providers share one contract: a deterministic hashing embedder for
tests, a precomputed-vector file store, and a client for an external
embedding service speaking newline-delimited JSON. Every provider emits
raw vectors through embed_raw() and all normalization happens in one
shared place, so capturing raw service responses into a file store and
replaying them reproduces bitwise-identical vectors.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import queue
import shlex
import socket
import subprocess
import threading
from abc import ABC, abstractmethod
from contextlib import contextmanager
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .textio import escape_field, unescape_field


class ProviderError(Exception):
    """An embedding provider could not produce vectors."""


def normalize(vectors: np.ndarray) -> np.ndarray:
    """L2-normalize a vector or each row of a matrix, as float64.

    Zero vectors and non-finite entries are errors. Row-wise results are
    bitwise identical whether rows are normalized singly or as a batch.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    single = arr.ndim == 1
    mat = arr.reshape(1, -1) if single else arr
    if mat.ndim != 2:
        raise ValueError(f"expected 1-D or 2-D input, got {arr.ndim}-D")
    if not np.all(np.isfinite(mat)):
        raise ValueError("vectors must be finite")
    norms = np.sqrt((mat * mat).sum(axis=1))
    if np.any(norms == 0.0):
        raise ValueError("zero vector cannot be normalized")
    out = mat / norms[:, None]
    return out[0] if single else out


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.dot(a, b) / (norm_a * norm_b))


class EmbeddingProvider(ABC):
    """Deterministic text-to-vector source with a fixed dimension and tag."""

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @property
    @abstractmethod
    def tag(self) -> str: ...

    @abstractmethod
    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        """Raw (pre-normalization) vectors, one row per text."""

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return normalize(self.embed_raw(list(texts)))

    def close(self) -> None:
        pass

    def __enter__(self) -> "EmbeddingProvider":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def embed_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    """Unit-normalized vectors for texts, order preserving.

    Thin validated front door over provider.embed: rejects empty input
    and non-string elements, and checks the output shape.
    """
    texts = list(texts)
    if not texts:
        raise ValueError("texts must be a non-empty list")
    for i, text in enumerate(texts):
        if not isinstance(text, str):
            raise ValueError(f"texts[{i}] is not a string: {text!r}")
    vectors = provider.embed(texts)
    if vectors.shape != (len(texts), provider.dim):
        raise ProviderError(
            f"provider {provider.tag!r} returned shape {vectors.shape}, "
            f"expected {(len(texts), provider.dim)}"
        )
    return vectors


class HashingEmbedder(EmbeddingProvider):
    """Character 1-3-gram hashing embedder; deterministic across platforms.

    Each gram is keyed-blake2b hashed to a signed bucket; counts are
    accumulated then normalized. Case-sensitive by design so that casing
    noise actually perturbs vectors. dimension >= 8.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 8:
            raise ValueError("dimension must be >= 8")
        self._dim = dim
        self._seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)
        self._cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def tag(self) -> str:
        return f"hash-{self._dim}-{self._seed}"

    def _digest(self, data: bytes) -> bytes:
        return hashlib.blake2b(data, digest_size=8, key=self._key).digest()

    def _raw_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self._dim, dtype=np.float64)
        grams = [
            text[i : i + n]
            for n in (1, 2, 3)
            for i in range(len(text) - n + 1)
        ] or [""]
        for gram in grams:
            h = self._digest(gram.encode("utf-8"))
            bucket = int.from_bytes(h[:4], "little") % self._dim
            vec[bucket] += 1.0 if h[4] & 1 else -1.0
        if not vec.any():
            # Signed counts cancelled out; fall back to a whole-text bucket.
            h = self._digest(b"\x00" + text.encode("utf-8"))
            vec[int.from_bytes(h[:4], "little") % self._dim] = 1.0
        return vec

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        return np.array([self._raw_one(t) for t in texts])

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for text in texts:
            row = self._cache.get(text)
            if row is None:
                row = normalize(self._raw_one(text))
                row.setflags(write=False)
                self._cache[text] = row
            rows.append(row)
        return np.array(rows)


VECTOR_FILE_HEADER_PREFIX = "dimension="


def write_vector_file(
    stream: IO[str], vectors: Mapping[str, np.ndarray], dim: int, tag: str
) -> None:
    """Write "dimension=<D> provider=<tag>" then one "text\\tfloats" line each.

    Floats are shortest round-trip decimals; texts are escaped for the
    tab-separated layout. Vectors are written as given (raw, not
    normalized) so a replaying store can normalize identically.
    """
    stream.write(f"dimension={dim} provider={tag}\n")
    for text, vec in vectors.items():
        floats = " ".join(repr(float(x)) for x in np.asarray(vec, dtype=np.float64))
        stream.write(f"{escape_field(text)}\t{floats}\n")


def read_vector_file(stream: Iterable[str]) -> tuple[dict[str, np.ndarray], int, str]:
    lines = iter(stream)
    header = next(lines, None)
    if header is None:
        raise ValueError("empty vector file")
    header = header.rstrip("\n")
    if not header.startswith("dimension="):
        raise ValueError(f"bad vector-file header: {header!r}")
    head, _, tag_part = header.partition(" ")
    if not tag_part.startswith("provider="):
        raise ValueError(f"bad vector-file header: {header!r}")
    dim = int(head[len("dimension=") :])
    tag = tag_part[len("provider=") :]
    vectors: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        text_part, sep, floats_part = line.partition("\t")
        if not sep:
            raise ValueError(f"vector file line {lineno}: missing tab separator")
        vec = np.array([float(x) for x in floats_part.split(" ")], dtype=np.float64)
        if vec.shape != (dim,):
            raise ValueError(
                f"vector file line {lineno}: expected {dim} floats, got {vec.shape[0]}"
            )
        vectors[unescape_field(text_part)] = vec
    return vectors, dim, tag


class VectorFileStore(EmbeddingProvider):
    """Provider backed by a fixed text-to-vector table.

    Stores raw vectors and normalizes at lookup, so a store captured from
    another provider reproduces that provider's normalized output
    bitwise. Unknown texts raise ProviderError naming the text.
    """

    def __init__(self, vectors: Mapping[str, np.ndarray], tag: str = "file", dim: int | None = None):
        self._vectors: dict[str, np.ndarray] = {}
        for text, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"vector for {text!r} is not 1-D")
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise ValueError(
                    f"vector for {text!r} has dimension {arr.shape[0]}, expected {dim}"
                )
            self._vectors[text] = arr
        if dim is None:
            raise ValueError("empty store requires an explicit dimension")
        self._dim = dim
        self._tag = tag

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def tag(self) -> str:
        return self._tag

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, text: str) -> bool:
        return text in self._vectors

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for text in texts:
            vec = self._vectors.get(text)
            if vec is None:
                raise ProviderError(f"no stored vector for text {text!r}")
            rows.append(vec)
        return np.array(rows)

    @classmethod
    def load(cls, path) -> "VectorFileStore":
        with open(path, "r", encoding="utf-8", newline="\n") as fh:
            vectors, dim, tag = read_vector_file(fh)
        return cls(vectors, tag=tag, dim=dim)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            write_vector_file(fh, self._vectors, self._dim, self._tag)


class CapturingProvider(EmbeddingProvider):
    """Wraps a provider and records every raw vector it produces.

    The recorded table can be saved as a vector file and later served by
    VectorFileStore for offline, bitwise-identical replay.
    """

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.captured: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def tag(self) -> str:
        return self.inner.tag

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        rows = self.inner.embed_raw(texts)
        for text, row in zip(texts, rows):
            if text not in self.captured:
                self.captured[text] = np.array(row, dtype=np.float64)
        return rows

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            write_vector_file(fh, self.captured, self.dim, self.tag)

    def close(self) -> None:
        self.inner.close()


class ServiceClient(EmbeddingProvider):
    """Client for the newline-delimited JSON embedding service.

    Endpoints: "tcp://HOST:PORT" for a local socket, or "stdio:COMMAND"
    to spawn the service as a subprocess and talk over its stdin/stdout.
    Requests are serialized per connection; a small pool allows
    concurrent callers over TCP. Response vectors are re-normalized
    defensively on the way out of embed().
    """

    def __init__(
        self,
        endpoint: str,
        tag: str = "service",
        pool_size: int = 1,
        timeout: float = 30.0,
        batch_size: int = 256,
    ):
        if pool_size < 1 or batch_size < 1:
            raise ValueError("pool_size and batch_size must be >= 1")
        self._endpoint = endpoint
        self._tag = tag
        self._timeout = timeout
        self._batch_size = batch_size
        self._ids = itertools.count(1)
        self._dim: int | None = None
        self._lock = threading.Lock()
        if endpoint.startswith("tcp://"):
            host, _, port = endpoint[len("tcp://") :].partition(":")
            if not host or not port:
                raise ValueError(f"bad tcp endpoint: {endpoint!r}")
            self._address = (host, int(port))
            self._proc = None
            self._pool: queue.LifoQueue = queue.LifoQueue(maxsize=pool_size)
            self._pool_spawned = 0
            self._pool_size = pool_size
        elif endpoint.startswith("stdio:"):
            argv = shlex.split(endpoint[len("stdio:") :])
            if not argv:
                raise ValueError(f"bad stdio endpoint: {endpoint!r}")
            try:
                self._proc = subprocess.Popen(
                    argv,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    encoding="utf-8",
                )
            except OSError as exc:
                raise ProviderError(f"cannot start embedding service {argv[0]!r}: {exc}") from exc
            self._address = None
        else:
            raise ValueError(f"unsupported endpoint {endpoint!r}; use tcp:// or stdio:")

    @property
    def dim(self) -> int:
        if self._dim is None:
            # Learn the dimension with a one-text probe.
            self.embed_raw([""])
        assert self._dim is not None
        return self._dim

    @property
    def tag(self) -> str:
        return self._tag

    @contextmanager
    def _connection(self):
        try:
            conn = self._pool.get_nowait()
        except queue.Empty:
            with self._lock:
                spawn = self._pool_spawned < self._pool_size
                if spawn:
                    self._pool_spawned += 1
            if spawn:
                try:
                    sock = socket.create_connection(self._address, timeout=self._timeout)
                except OSError as exc:
                    with self._lock:
                        self._pool_spawned -= 1
                    raise ProviderError(
                        f"embedding service unreachable at {self._endpoint}: {exc}"
                    ) from exc
                conn = (
                    sock,
                    sock.makefile("r", encoding="utf-8", newline="\n"),
                    sock.makefile("w", encoding="utf-8", newline="\n"),
                )
            else:
                conn = self._pool.get()
        try:
            yield conn
        except Exception:
            sock = conn[0]
            sock.close()
            with self._lock:
                self._pool_spawned -= 1
            raise
        else:
            self._pool.put(conn)

    def _roundtrip(self, request: dict) -> dict:
        line = json.dumps(request, ensure_ascii=False) + "\n"
        if self._proc is not None:
            with self._lock:
                if self._proc.poll() is not None:
                    raise ProviderError("embedding service subprocess has exited")
                try:
                    self._proc.stdin.write(line)
                    self._proc.stdin.flush()
                    reply = self._proc.stdout.readline()
                except OSError as exc:
                    raise ProviderError(f"embedding service pipe failure: {exc}") from exc
        else:
            with self._connection() as (_sock, reader, writer):
                try:
                    writer.write(line)
                    writer.flush()
                    reply = reader.readline()
                except OSError as exc:
                    raise ProviderError(f"embedding service socket failure: {exc}") from exc
        if not reply:
            raise ProviderError("embedding service closed the connection")
        try:
            response = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise ProviderError(f"embedding service sent invalid JSON: {exc}") from exc
        if response.get("id") != request["id"]:
            raise ProviderError(
                f"embedding service answered id {response.get('id')!r} "
                f"to request id {request['id']}"
            )
        if "error" in response:
            raise ProviderError(f"embedding service error: {response['error']}")
        return response

    def _request_vectors(self, texts: list[str]) -> np.ndarray:
        response = self._roundtrip({"id": next(self._ids), "texts": texts})
        vectors = response.get("vectors")
        dim = response.get("dim")
        if not isinstance(vectors, list) or not isinstance(dim, int):
            raise ProviderError("embedding service response missing vectors/dim")
        if len(vectors) != len(texts):
            raise ProviderError(
                f"embedding service returned {len(vectors)} vectors for "
                f"{len(texts)} texts (first text {texts[0]!r})"
            )
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != dim:
            raise ProviderError(f"embedding service vector shape {arr.shape} != dim {dim}")
        if self._dim is None:
            self._dim = dim
        elif dim != self._dim:
            raise ProviderError(f"embedding service dim changed from {self._dim} to {dim}")
        return arr

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        chunks = [
            self._request_vectors(texts[i : i + self._batch_size])
            for i in range(0, len(texts), self._batch_size)
        ]
        return chunks[0] if len(chunks) == 1 else np.concatenate(chunks, axis=0)

    def close(self) -> None:
        if self._proc is not None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        else:
            while True:
                try:
                    sock, _r, _w = self._pool.get_nowait()
                except queue.Empty:
                    break
                sock.close()


def provider_from_spec(spec: str, tag: str | None = None) -> EmbeddingProvider:
    """Build a provider from a spec string.

    Forms: "hash[:DIM[:SEED]]" (test embedder), "file:PATH" (vector file
    store), "tcp://HOST:PORT" or "stdio:COMMAND" (external service).
    """
    if spec == "hash" or spec.startswith("hash:"):
        parts = spec.split(":")
        dim = int(parts[1]) if len(parts) > 1 and parts[1] else 256
        seed = int(parts[2]) if len(parts) > 2 and parts[2] else 0
        return HashingEmbedder(dim=dim, seed=seed)
    if spec.startswith("file:"):
        return VectorFileStore.load(spec[len("file:") :])
    if spec.startswith(("tcp://", "stdio:")):
        return ServiceClient(spec, tag=tag or "service")
    raise ValueError(f"unknown provider spec {spec!r}")
