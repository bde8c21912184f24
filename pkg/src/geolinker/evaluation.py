"""Measurement suite: hierarchical matching, selective-prediction
metrics, per-country F1, precision-coverage curves, mention-count
buckets, and the train/test split.

Correctness is exact string matching on normalized components, applied
hierarchically: a prediction can only be city-correct if it is also
admin- and country-correct. Abstentions (Null) count against accuracy
but not against precision.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .gazetteer import NULL_TRIPLE, Granularity, LocationTriple
from .index import LabeledMention, LocationIndex
from .linker import Prediction

# The ten standard curve thresholds.
DEFAULT_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(10))


@dataclass(frozen=True)
class MatchResult:
    country_correct: bool
    admin_correct: bool
    city_correct: bool

    def at(self, level: Granularity) -> bool:
        if level is Granularity.COUNTRY:
            return self.country_correct
        if level is Granularity.ADMIN1:
            return self.admin_correct
        return self.city_correct


def match_level(pred: LocationTriple, truth: LocationTriple) -> MatchResult:
    """Hierarchical string match; Null predictions match nothing.

    Components compare case-folded; empty-vs-empty is a match, so a
    country-only prediction is fully correct against a country-only
    truth, while empty-vs-non-empty is a mismatch.
    """
    if truth.is_null():
        raise ValueError("truth triple must be non-Null")
    if pred.is_null():
        return MatchResult(False, False, False)
    pred_city, pred_admin, pred_country = pred.key()
    truth_city, truth_admin, truth_country = truth.key()
    country = pred_country == truth_country
    admin = country and pred_admin == truth_admin
    city = admin and pred_city == truth_city
    return MatchResult(country, admin, city)


@dataclass(frozen=True)
class Metrics:
    """accuracy = correct/n, coverage = non-Null/n, precision = correct/non-Null.

    precision is NaN when coverage is zero; otherwise
    accuracy == precision * coverage holds to within 1e-12.
    """

    accuracy: float
    coverage: float
    precision: float
    n: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "coverage": self.coverage,
            "precision": None if math.isnan(self.precision) else self.precision,
            "n": self.n,
        }


def _check_lengths(predictions: Sequence, truths: Sequence) -> None:
    if len(predictions) != len(truths):
        raise ValueError(
            f"{len(predictions)} predictions vs {len(truths)} truths"
        )
    if not predictions:
        raise ValueError("cannot evaluate zero examples")


def _metrics_from_pairs(
    pairs: Iterable[tuple[LocationTriple, LocationTriple]], level: Granularity
) -> Metrics:
    total = 0
    non_null = 0
    correct = 0
    for pred, truth in pairs:
        total += 1
        if pred.is_null():
            continue
        non_null += 1
        if match_level(pred, truth).at(level):
            correct += 1
    accuracy = correct / total
    coverage = non_null / total
    precision = correct / non_null if non_null else float("nan")
    return Metrics(accuracy, coverage, precision, total)


def compute_metrics(
    predictions: Sequence[Prediction],
    truths: Sequence[LocationTriple],
    level: Granularity,
) -> Metrics:
    _check_lengths(predictions, truths)
    return _metrics_from_pairs(
        ((p.triple, t) for p, t in zip(predictions, truths)), level
    )


def per_country_f1(
    predictions: Sequence[Prediction],
    truths: Sequence[LocationTriple],
    min_examples: int = 1,
) -> dict[str, float]:
    """One-vs-rest country-level F1 for countries with enough examples.

    Null predictions are negatives (they contribute false negatives when
    the truth names the country). Keys are the first-seen display form
    of each country name.
    """
    _check_lengths(predictions, truths)
    display: dict[str, str] = {}
    truth_counts: dict[str, int] = {}
    for truth in truths:
        key = truth.country.casefold()
        display.setdefault(key, truth.country)
        truth_counts[key] = truth_counts.get(key, 0) + 1

    result: dict[str, float] = {}
    for key, count in truth_counts.items():
        if count < min_examples:
            continue
        tp = fp = fn = 0
        for pred, truth in zip(predictions, truths):
            truth_is_c = truth.country.casefold() == key
            pred_is_c = (not pred.triple.is_null()) and pred.triple.country.casefold() == key
            if truth_is_c and pred_is_c:
                tp += 1
            elif pred_is_c:
                fp += 1
            elif truth_is_c:
                fn += 1
        result[display[key]] = 2 * tp / (2 * tp + fp + fn)
    return result


def precision_coverage_curve(
    scored_predictions: Sequence[tuple[LocationTriple, float]],
    truths: Sequence[LocationTriple],
    level: Granularity,
    thresholds: Sequence[float] | None = None,
) -> list[tuple[float, float, float]]:
    """(threshold, precision, coverage) points by post-hoc re-filtering.

    Inputs are (triple, score) pairs from a threshold-0 run; at each
    threshold, predictions scoring below it are treated as Null and the
    metrics recomputed. Thresholds are sorted and deduplicated.
    """
    _check_lengths(scored_predictions, truths)
    points = []
    for t in sorted(set(DEFAULT_THRESHOLDS if thresholds is None else thresholds)):
        pairs = (
            (triple if (not triple.is_null() and score >= t) else NULL_TRIPLE, truth)
            for (triple, score), truth in zip(scored_predictions, truths)
        )
        metrics = _metrics_from_pairs(pairs, level)
        points.append((float(t), metrics.precision, metrics.coverage))
    return points


def _bucket_label(mention_count: int) -> str:
    if mention_count == 0:
        return "zero"
    # floor(log2(n)) exactly, no float log round-off
    return str(mention_count.bit_length() - 1)


def mention_bucket_accuracy(
    predictions: Sequence[Prediction],
    truths: Sequence[LocationTriple],
    index: LocationIndex,
    level: Granularity,
) -> dict[str, tuple[float, int]]:
    """Accuracy bucketed by floor(log2(truth's mention count)).

    Zero-mention truths fall into the "zero" bucket; truths absent from
    the index fall into "unknown". Numeric buckets come first in
    ascending order.
    """
    _check_lengths(predictions, truths)
    totals: dict[str, int] = {}
    corrects: dict[str, int] = {}
    for pred, truth in zip(predictions, truths):
        if truth in index:
            label = _bucket_label(index.entry(truth).mention_count)
        else:
            label = "unknown"
        totals[label] = totals.get(label, 0) + 1
        if not pred.triple.is_null() and match_level(pred.triple, truth).at(level):
            corrects[label] = corrects.get(label, 0) + 1

    def order(label: str) -> tuple[int, int]:
        if label == "zero":
            return (1, 0)
        if label == "unknown":
            return (2, 0)
        return (0, int(label))

    return {
        label: (corrects.get(label, 0) / totals[label], totals[label])
        for label in sorted(totals, key=order)
    }


def split_train_test(
    mentions: Sequence[LabeledMention], test_fraction: float, seed: int
) -> tuple[list[LabeledMention], list[LabeledMention]]:
    """Seeded disjoint split with |test| = round(fraction * n).

    Membership comes from a seeded shuffle; each side preserves the
    original corpus order.
    """
    if not mentions:
        raise ValueError("cannot split zero mentions")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    order = list(range(len(mentions)))
    random.Random(seed).shuffle(order)
    n_test = round(test_fraction * len(mentions))
    test_idx = sorted(order[:n_test])
    train_idx = sorted(order[n_test:])
    return [mentions[i] for i in train_idx], [mentions[i] for i in test_idx]


CURVE_CSV_HEADER = "threshold,precision,coverage,level"


def write_curve_csv(
    points_by_level: dict[Granularity, list[tuple[float, float, float]]],
    stream: IO[str],
) -> None:
    """One CSV row per curve point per level; NaN precision stays "nan"."""
    stream.write(CURVE_CSV_HEADER + "\n")
    for level, points in points_by_level.items():
        for threshold, precision, coverage in points:
            stream.write(
                f"{threshold!r},{precision!r},{coverage!r},{level.value}\n"
            )


def evaluation_report(
    predictions: Sequence[Prediction],
    truths: Sequence[LocationTriple],
    index: LocationIndex | None = None,
    thresholds: Sequence[float] | None = None,
    min_examples: int = 1,
    scored: Sequence[tuple[LocationTriple, float]] | None = None,
) -> dict:
    """Full JSON-ready report: per-level metrics, F1 table, curve, buckets.

    When the headline predictions were filtered at a nonzero threshold,
    pass the raw threshold-0 (triple, score) pairs as `scored` so the
    curve can re-filter from unfiltered scores.
    """
    _check_lengths(predictions, truths)
    if scored is None:
        scored = [(p.triple, p.score) for p in predictions]
    report: dict = {
        "n": len(predictions),
        "levels": {
            level.value: compute_metrics(predictions, truths, level).as_dict()
            for level in Granularity
        },
        "per_country_f1": per_country_f1(predictions, truths, min_examples),
        "curve": {
            level.value: [
                {
                    "threshold": t,
                    "precision": None if math.isnan(p) else p,
                    "coverage": c,
                }
                for t, p, c in precision_coverage_curve(scored, truths, level, thresholds)
            ]
            for level in Granularity
        },
    }
    if index is not None:
        report["buckets"] = {
            level.value: {
                label: {"accuracy": acc, "n": n}
                for label, (acc, n) in mention_bucket_accuracy(
                    predictions, truths, index, level
                ).items()
            }
            for level in Granularity
        }
    return report
