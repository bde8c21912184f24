"""Nearest-centroid linking with a selective-prediction threshold.

An input is embedded, scored against every index centroid by dot
product (all vectors are unit norm), and the best location is returned
when its score clears the threshold; otherwise the prediction is Null
but still carries the best score found. Exact ties resolve to the
lexicographically first (country, admin1, city) triple, which is the
index storage order, so the first argmax is already the winner.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .embedding import EmbeddingProvider, ProviderError, embed_batch
from .gazetteer import NULL_TRIPLE, LocationTriple
from .index import LocationIndex
from .textio import escape_field, unescape_field


@dataclass(frozen=True)
class Prediction:
    """Linked triple (Null when abstaining), best score, and acceptance."""

    triple: LocationTriple
    score: float
    accepted: bool

    def __post_init__(self) -> None:
        if self.accepted == self.triple.is_null():
            raise ValueError("accepted must be false exactly when the triple is Null")


def _check_threshold(threshold: float) -> None:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold!r} outside [0, 1]")


def _check_provider(index: LocationIndex, provider: EmbeddingProvider) -> None:
    if provider.dim != index.dim:
        raise ValueError(
            f"provider dimension {provider.dim} != index dimension {index.dim}"
        )
    if index.provider_tag and provider.tag != index.provider_tag:
        # Dimension agreement keeps this workable; flag it anyway since
        # scores from a different model family are not comparable.
        warnings.warn(
            f"provider tag {provider.tag!r} differs from index tag "
            f"{index.provider_tag!r}",
            stacklevel=3,
        )


def _predict(index: LocationIndex, vector: np.ndarray, threshold: float) -> Prediction:
    # Elementwise product + pairwise row sum instead of BLAS gemv: the
    # result is then bit-reproducible by an independent per-row scan,
    # which the test oracles rely on.
    scores = (index.matrix * vector).sum(axis=1)
    best = int(np.argmax(scores))
    score = float(scores[best])
    if score >= threshold:
        return Prediction(index.triples[best], score, True)
    return Prediction(NULL_TRIPLE, score, False)


def link(
    index: LocationIndex,
    provider: EmbeddingProvider,
    user_input: str,
    threshold: float,
) -> Prediction:
    """Predict a location triple (or Null) for one user input."""
    _check_threshold(threshold)
    _check_provider(index, provider)
    vector = embed_batch(provider, [user_input])[0]
    return _predict(index, vector, threshold)


def _embed_reporting_offset(
    provider: EmbeddingProvider, inputs: Sequence[str], base: int
) -> np.ndarray:
    try:
        return embed_batch(provider, inputs)
    except ProviderError:
        # Locate the first failing input so the error names its offset.
        for i, text in enumerate(inputs):
            try:
                embed_batch(provider, [text])
            except ProviderError as exc:
                raise ProviderError(f"input {base + i}: {exc}") from exc
        raise


def link_batch(
    index: LocationIndex,
    provider: EmbeddingProvider,
    inputs: Sequence[str],
    threshold: float,
    jobs: int = 1,
) -> list[Prediction]:
    """Order-preserving batch form of link(); element-wise identical.

    Scoring is per input with the same kernel as link(), so batching can
    never change a score bitwise. Provider failures abort on the first
    failing input, reporting its offset.
    """
    _check_threshold(threshold)
    _check_provider(index, provider)
    inputs = list(inputs)
    if not inputs:
        return []
    if jobs <= 1 or len(inputs) < 2 * jobs:
        vectors = _embed_reporting_offset(provider, inputs, 0)
    else:
        size = (len(inputs) + jobs - 1) // jobs
        chunks = [(i, inputs[i : i + size]) for i in range(0, len(inputs), size)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(
                pool.map(lambda c: _embed_reporting_offset(provider, c[1], c[0]), chunks)
            )
        vectors = np.concatenate(parts, axis=0)
    return [_predict(index, vectors[i], threshold) for i in range(len(inputs))]


PREDICTION_COLUMNS = 6


def write_predictions(
    inputs: Sequence[str], predictions: Sequence[Prediction], stream: IO[str]
) -> None:
    """TSV rows: escaped input, triple fields, score, accepted."""
    if len(inputs) != len(predictions):
        raise ValueError("inputs and predictions must align")
    for text, pred in zip(inputs, predictions):
        stream.write(
            "\t".join(
                [
                    escape_field(text),
                    pred.triple.city,
                    pred.triple.admin1,
                    pred.triple.country,
                    repr(pred.score),
                    "true" if pred.accepted else "false",
                ]
            )
            + "\n"
        )


def read_predictions(stream: Iterable[str]) -> list[tuple[str, Prediction]]:
    out: list[tuple[str, Prediction]] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != PREDICTION_COLUMNS:
            raise ValueError(
                f"predictions line {lineno}: expected {PREDICTION_COLUMNS} fields, "
                f"got {len(fields)}"
            )
        text, city, admin1, country, score, accepted = fields
        if accepted not in ("true", "false"):
            raise ValueError(f"predictions line {lineno}: bad accepted flag {accepted!r}")
        out.append(
            (
                unescape_field(text),
                Prediction(
                    LocationTriple(city, admin1, country),
                    float(score),
                    accepted == "true",
                ),
            )
        )
    return out
