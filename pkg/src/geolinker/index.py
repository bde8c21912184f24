"""Location index construction: centroids per location triple.

Two build strategies share one geometry: every location gets the
normalized mean of its member embeddings. The name-only build uses just
canonical strings (optionally the variant templates); the user-mention
build adds labeled user inputs and supports one-shot outlier pruning.
Members are unit-normalized before averaging and the mean is
re-normalized, so a zero-mention user build degenerates bitwise into the
name-only build.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .embedding import EmbeddingProvider, embed_batch, normalize
from .gazetteer import LocationEntity, LocationTriple, canonical_string, name_variants
from .textio import escape_field, unescape_field


@dataclass(frozen=True)
class LabeledMention:
    """A raw user-entered location string paired with its truth triple."""

    user_input: str
    truth: LocationTriple

    def __post_init__(self) -> None:
        if self.truth.is_null():
            raise ValueError("mention truth must be non-Null")


@dataclass
class PruneConfig:
    enabled: bool = True
    multiplier: float = 1.0
    exempt_supplemental: bool = True

    def __post_init__(self) -> None:
        if not self.multiplier > 0:
            raise ValueError("prune multiplier must be > 0")

    def as_dict(self) -> dict:
        return {
            "enabled": self.enabled,
            "multiplier": self.multiplier,
            "exempt_supplemental": self.exempt_supplemental,
        }


NO_PRUNING = PruneConfig(enabled=False)


@dataclass(frozen=True)
class IndexEntry:
    centroid: np.ndarray
    mention_count: int
    supplemental_count: int


@dataclass
class BuildStats:
    """Counters from a user-mention index build."""

    mentions_total: int = 0
    mentions_dropped: int = 0
    members_prunable: int = 0
    members_pruned: int = 0

    @property
    def pruned_fraction(self) -> float:
        if self.members_prunable == 0:
            return 0.0
        return self.members_pruned / self.members_prunable


class LocationIndex:
    """Immutable map from location triples to centroid entries.

    Entries are held sorted by (country, admin1, city) case-folded, so
    the first maximum over the centroid matrix realizes the
    deterministic tie-break order. Lookups use the case-folded triple
    key.
    """

    def __init__(
        self,
        items: Iterable[tuple[LocationTriple, IndexEntry]],
        dim: int,
        provider_tag: str,
        mode: Mapping | None = None,
    ):
        ordered = sorted(items, key=lambda pair: pair[0].sort_key())
        self._dim = dim
        self._provider_tag = provider_tag
        self._mode = dict(mode or {})
        self.triples: list[LocationTriple] = []
        self._entries: dict[tuple[str, str, str], IndexEntry] = {}
        rows = []
        for triple, entry in ordered:
            key = triple.key()
            if key in self._entries:
                raise ValueError(f"duplicate triple in index: {triple}")
            centroid = np.asarray(entry.centroid, dtype=np.float64)
            if centroid.shape != (dim,):
                raise ValueError(
                    f"centroid for {triple} has shape {centroid.shape}, expected ({dim},)"
                )
            if abs(float(np.linalg.norm(centroid)) - 1.0) > 1e-6:
                raise ValueError(f"centroid for {triple} is not unit-normalized")
            if entry.mention_count < 0 or entry.supplemental_count < 0:
                raise ValueError("entry counts must be >= 0")
            self.triples.append(triple)
            self._entries[key] = IndexEntry(
                centroid, entry.mention_count, entry.supplemental_count
            )
            rows.append(centroid)
        if not rows:
            raise ValueError("index must contain at least one entry")
        self.matrix = np.array(rows)
        self.matrix.setflags(write=False)
        self.build_stats: BuildStats | None = None

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def provider_tag(self) -> str:
        return self._provider_tag

    @property
    def mode(self) -> dict:
        return dict(self._mode)

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple: LocationTriple) -> bool:
        return triple.key() in self._entries

    def entry(self, triple: LocationTriple) -> IndexEntry:
        return self._entries[triple.key()]

    def items(self) -> Iterable[tuple[LocationTriple, IndexEntry]]:
        for triple in self.triples:
            yield triple, self._entries[triple.key()]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            write_index(self, fh)

    @classmethod
    def load(cls, path) -> "LocationIndex":
        with open(path, "r", encoding="utf-8", newline="\n") as fh:
            return read_index(fh)


def write_index(index: LocationIndex, stream: IO[str]) -> None:
    """Header JSON line, then one tab-separated entry line per triple."""
    header = {
        "dim": index.dim,
        "provider": index.provider_tag,
        "mode": index.mode,
        "entry_count": len(index),
    }
    stream.write(json.dumps(header, ensure_ascii=False) + "\n")
    for triple, entry in index.items():
        floats = " ".join(repr(float(x)) for x in entry.centroid)
        stream.write(
            "\t".join(
                [
                    escape_field(triple.city),
                    escape_field(triple.admin1),
                    escape_field(triple.country),
                    str(entry.mention_count),
                    str(entry.supplemental_count),
                    floats,
                ]
            )
            + "\n"
        )


def read_index(stream: Iterable[str]) -> LocationIndex:
    lines = iter(stream)
    header_line = next(lines, None)
    if header_line is None:
        raise ValueError("empty index file")
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad index header: {exc}") from exc
    dim = header.get("dim")
    entry_count = header.get("entry_count")
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("index header missing a valid dim")
    items: list[tuple[LocationTriple, IndexEntry]] = []
    for lineno, line in enumerate(lines, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise ValueError(f"index line {lineno}: expected 6 fields, got {len(fields)}")
        city, admin1, country, mention_count, supplemental_count, floats = fields
        triple = LocationTriple(
            unescape_field(city), unescape_field(admin1), unescape_field(country)
        )
        centroid = np.array([float(x) for x in floats.split(" ")], dtype=np.float64)
        items.append(
            (triple, IndexEntry(centroid, int(mention_count), int(supplemental_count)))
        )
    if isinstance(entry_count, int) and entry_count != len(items):
        raise ValueError(
            f"index header claims {entry_count} entries, file has {len(items)}"
        )
    return LocationIndex(
        items, dim=dim, provider_tag=str(header.get("provider", "")), mode=header.get("mode") or {}
    )


def prune_outliers(
    vectors: np.ndarray | Sequence[np.ndarray],
    exempt: frozenset[int] | set[int] = frozenset(),
    multiplier: float = 1.0,
) -> list[int]:
    """One-shot outlier removal; returns the kept indices, in order.

    The centroid is the plain mean of all members; a non-exempt member is
    dropped when its squared Euclidean distance from that centroid
    exceeds multiplier times the mean squared distance. Never iterated.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("prune_outliers requires at least one vector")
    if not multiplier > 0:
        raise ValueError("multiplier must be > 0")
    centroid = arr.mean(axis=0)
    deltas = arr - centroid
    sq_dist = (deltas * deltas).sum(axis=1)
    threshold = multiplier * float(sq_dist.mean())
    return [
        i for i in range(arr.shape[0]) if i in exempt or float(sq_dist[i]) <= threshold
    ]


def _supplemental_texts(entity: LocationEntity, use_variants: bool) -> list[str]:
    return name_variants(entity) if use_variants else [canonical_string(entity)]


def _embed_unique(
    provider: EmbeddingProvider, texts: Sequence[str], jobs: int = 1
) -> dict[str, np.ndarray]:
    """Embed the unique texts once, optionally chunked across threads."""
    unique = list(dict.fromkeys(texts))
    if not unique:
        return {}
    if jobs <= 1 or len(unique) < 2 * jobs:
        matrix = embed_batch(provider, unique)
    else:
        size = (len(unique) + jobs - 1) // jobs
        chunks = [unique[i : i + size] for i in range(0, len(unique), size)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda c: embed_batch(provider, c), chunks))
        matrix = np.concatenate(parts, axis=0)
    return {text: matrix[i] for i, text in enumerate(unique)}


def _centroid_from_members(rows: np.ndarray, full_count: int) -> np.ndarray:
    # Mean over kept members with the full-set denominator; the direction
    # is what survives re-normalization, so the denominator choice is
    # observationally irrelevant but kept literal.
    return normalize(rows.sum(axis=0) / float(full_count))


def build_name_index(
    entities: Sequence[LocationEntity],
    provider: EmbeddingProvider,
    use_variants: bool = False,
    jobs: int = 1,
) -> LocationIndex:
    """Zero-shot index: centroids from canonical strings (and variants)."""
    if not entities:
        raise ValueError("cannot build an index from zero entities")
    texts_per_entity = [_supplemental_texts(e, use_variants) for e in entities]
    vec_by_text = _embed_unique(
        provider, [t for texts in texts_per_entity for t in texts], jobs
    )
    items = []
    for entity, texts in zip(entities, texts_per_entity):
        rows = np.array([vec_by_text[t] for t in texts])
        centroid = _centroid_from_members(rows, rows.shape[0])
        items.append(
            (entity.triple(), IndexEntry(centroid, 0, len(texts)))
        )
    mode = {
        "strategy": "namegeo",
        "variants": use_variants,
        "prune": NO_PRUNING.as_dict(),
    }
    return LocationIndex(items, dim=provider.dim, provider_tag=provider.tag, mode=mode)


def build_user_index(
    entities: Sequence[LocationEntity],
    mentions: Sequence[LabeledMention],
    provider: EmbeddingProvider,
    use_variants: bool = False,
    prune: PruneConfig | None = None,
    jobs: int = 1,
) -> LocationIndex:
    """Mention-centroid index with supplemental canonical strings.

    Each location's members are its labeled user inputs plus its
    supplemental strings; locations with no mentions fall back to
    supplemental-only centroids. Mentions whose truth is not in the
    entity list are dropped and counted in build_stats. Pruning is
    one-shot per location; supplemental members can be exempted.
    """
    if not entities:
        raise ValueError("cannot build an index from zero entities")
    prune = prune if prune is not None else PruneConfig()
    stats = BuildStats(mentions_total=len(mentions))

    by_key: dict[tuple[str, str, str], list[str]] = {
        e.triple().key(): [] for e in entities
    }
    for mention in mentions:
        bucket = by_key.get(mention.truth.key())
        if bucket is None:
            stats.mentions_dropped += 1
        else:
            bucket.append(mention.user_input)

    texts_per_entity = [_supplemental_texts(e, use_variants) for e in entities]
    all_texts: list[str] = []
    for texts in texts_per_entity:
        all_texts.extend(texts)
    for inputs in by_key.values():
        all_texts.extend(inputs)
    vec_by_text = _embed_unique(provider, all_texts, jobs)

    items = []
    for entity, supplemental in zip(entities, texts_per_entity):
        inputs = by_key[entity.triple().key()]
        member_texts = inputs + supplemental
        rows = np.array([vec_by_text[t] for t in member_texts])
        full_count = rows.shape[0]
        if prune.enabled:
            exempt = (
                frozenset(range(len(inputs), full_count))
                if prune.exempt_supplemental
                else frozenset()
            )
            kept = prune_outliers(rows, exempt, prune.multiplier)
            prunable = full_count - len(exempt)
            stats.members_prunable += prunable
            stats.members_pruned += full_count - len(kept)
            rows = rows[kept]
        centroid = _centroid_from_members(rows, full_count)
        items.append(
            (entity.triple(), IndexEntry(centroid, len(inputs), len(supplemental)))
        )
    mode = {
        "strategy": "usergeo",
        "variants": use_variants,
        "prune": prune.as_dict(),
    }
    index = LocationIndex(items, dim=provider.dim, provider_tag=provider.tag, mode=mode)
    index.build_stats = stats
    return index


def read_mentions(stream: Iterable[str]) -> list[LabeledMention]:
    """Read labeled mentions: "input\\tcity\\tadmin1\\tcountry" per line.

    The input field is tab/newline-escaped; truth components are plain
    text (normalized on load). No header line.
    """
    mentions = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ValueError(f"mentions line {lineno}: expected 4 fields, got {len(fields)}")
        try:
            truth = LocationTriple(fields[1], fields[2], fields[3])
            mentions.append(LabeledMention(unescape_field(fields[0]), truth))
        except ValueError as exc:
            raise ValueError(f"mentions line {lineno}: {exc}") from exc
    return mentions


def write_mentions(mentions: Iterable[LabeledMention], stream: IO[str]) -> int:
    count = 0
    for mention in mentions:
        stream.write(
            "\t".join(
                [
                    escape_field(mention.user_input),
                    mention.truth.city,
                    mention.truth.admin1,
                    mention.truth.country,
                ]
            )
            + "\n"
        )
        count += 1
    return count
