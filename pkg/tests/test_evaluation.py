import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from geolinker import (
    DEFAULT_THRESHOLDS,
    Granularity,
    HashingEmbedder,
    IndexEntry,
    LabeledMention,
    LocationIndex,
    LocationTriple,
    Prediction,
    build_name_index,
    compute_metrics,
    evaluation_report,
    link_batch,
    match_level,
    mention_bucket_accuracy,
    per_country_f1,
    precision_coverage_curve,
    split_train_test,
)
from geolinker.evaluation import CURVE_CSV_HEADER, write_curve_csv

import io


def pred(city="", admin1="", country="", score=0.9):
    triple = LocationTriple(city, admin1, country)
    return Prediction(triple, score, not triple.is_null())


NULL_PRED = Prediction(LocationTriple(), -0.1, False)


class TestMatchLevel:
    def test_country_only_match(self):
        r = match_level(
            LocationTriple(country="US"),
            LocationTriple("New York City", "New York", "US"),
        )
        assert (r.country_correct, r.admin_correct, r.city_correct) == (True, False, False)

    def test_full_match(self):
        t = LocationTriple("Iwaki", "Fukushima", "JP")
        r = match_level(t, t)
        assert (r.country_correct, r.admin_correct, r.city_correct) == (True, True, True)

    def test_city_near_miss(self):
        r = match_level(
            LocationTriple("Boyabat", "Sinop", "TR"),
            LocationTriple("Sinop", "Sinop", "TR"),
        )
        assert (r.country_correct, r.admin_correct, r.city_correct) == (True, True, False)

    def test_null_prediction_matches_nothing(self):
        r = match_level(LocationTriple(), LocationTriple(country="US"))
        assert (r.country_correct, r.admin_correct, r.city_correct) == (False, False, False)

    def test_null_truth_rejected(self):
        with pytest.raises(ValueError):
            match_level(LocationTriple(country="US"), LocationTriple())

    def test_case_insensitive(self):
        r = match_level(
            LocationTriple("IWAKI", "FUKUSHIMA", "JAPAN"),
            LocationTriple("Iwaki", "Fukushima", "Japan"),
        )
        assert r.city_correct

    def test_empty_vs_empty_matches_at_every_level(self):
        r = match_level(LocationTriple(country="US"), LocationTriple(country="US"))
        assert (r.country_correct, r.admin_correct, r.city_correct) == (True, True, True)

    def test_hierarchy_invariant(self):
        r = match_level(
            LocationTriple("Iwaki", "Fukushima", "JP"),
            LocationTriple("Iwaki", "Aomori", "JP"),
        )
        assert r.country_correct and not r.admin_correct and not r.city_correct


class TestComputeMetrics:
    def test_worked_example(self):
        # 10 examples: 8 non-Null of which 6 are country-correct.
        predictions = (
            [pred(country="AA") for _ in range(6)]
            + [pred(country="BB") for _ in range(2)]
            + [NULL_PRED, NULL_PRED]
        )
        truths = [LocationTriple(country="AA")] * 10
        m = compute_metrics(predictions, truths, Granularity.COUNTRY)
        assert m.accuracy == pytest.approx(0.6, abs=1e-12)
        assert m.coverage == pytest.approx(0.8, abs=1e-12)
        assert m.precision == pytest.approx(0.75, abs=1e-12)
        assert m.n == 10

    def test_all_null(self):
        m = compute_metrics(
            [NULL_PRED] * 3, [LocationTriple(country="AA")] * 3, Granularity.COUNTRY
        )
        assert m.accuracy == 0.0 and m.coverage == 0.0
        assert math.isnan(m.precision)

    def test_perfect(self):
        truths = [LocationTriple("A", "B", "C"), LocationTriple(country="D")]
        predictions = [pred("A", "B", "C"), pred(country="D")]
        m = compute_metrics(predictions, truths, Granularity.CITY)
        assert (m.accuracy, m.coverage, m.precision) == (1.0, 1.0, 1.0)

    def test_product_identity_and_hierarchy(self, toy_entities, clean_corpus):
        provider = HashingEmbedder(128, 3)
        index = build_name_index(clean_corpus.entities, provider)
        mentions = clean_corpus.mentions[:300]
        predictions = link_batch(index, provider, [m.user_input for m in mentions], 0.4)
        truths = [m.truth for m in mentions]
        values = {}
        for level in Granularity:
            m = compute_metrics(predictions, truths, level)
            if m.coverage > 0:
                assert m.accuracy == pytest.approx(m.precision * m.coverage, abs=1e-12)
            assert m.accuracy <= m.coverage
            values[level] = m.accuracy
        assert values[Granularity.COUNTRY] >= values[Granularity.ADMIN1]
        assert values[Granularity.ADMIN1] >= values[Granularity.CITY]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_metrics([NULL_PRED], [], Granularity.COUNTRY)
        with pytest.raises(ValueError):
            compute_metrics([], [], Granularity.COUNTRY)


class TestPerCountryF1:
    def test_perfect_predictor(self):
        truths = [LocationTriple(country=c) for c in ("AA", "AA", "BB")]
        predictions = [pred(country=c) for c in ("AA", "AA", "BB")]
        f1 = per_country_f1(predictions, truths)
        assert f1 == {"AA": 1.0, "BB": 1.0}

    def test_never_predicted_country_scores_zero(self):
        truths = [LocationTriple(country="AA"), LocationTriple(country="BB")]
        predictions = [pred(country="BB"), pred(country="BB")]
        f1 = per_country_f1(predictions, truths)
        assert f1["AA"] == 0.0

    def test_three_country_confusion(self):
        # Hand-built confusion:
        #   AA truths: 3 -> predicted AA, AA, BB        (TP=2, FN=1)
        #   BB truths: 2 -> predicted BB, Null          (TP=1, FN=1)
        #   CC truths: 1 -> predicted AA                (TP=0, FN=1)
        # Predicted AA for a CC truth adds FP to AA; BB got one FP from AA.
        truths = [LocationTriple(country=c) for c in ("AA", "AA", "AA", "BB", "BB", "CC")]
        predictions = [
            pred(country="AA"), pred(country="AA"), pred(country="BB"),
            pred(country="BB"), NULL_PRED, pred(country="AA"),
        ]
        f1 = per_country_f1(predictions, truths)
        assert f1["AA"] == pytest.approx(2 * 2 / (2 * 2 + 1 + 1), abs=1e-12)
        assert f1["BB"] == pytest.approx(2 * 1 / (2 * 1 + 1 + 1), abs=1e-12)
        assert f1["CC"] == 0.0

    def test_min_examples_filters(self):
        truths = [LocationTriple(country="AA")] * 5 + [LocationTriple(country="BB")]
        predictions = [pred(country="AA")] * 6
        f1 = per_country_f1(predictions, truths, min_examples=2)
        assert "BB" not in f1 and "AA" in f1

    def test_null_counts_as_negative(self):
        truths = [LocationTriple(country="AA")] * 2
        predictions = [pred(country="AA"), NULL_PRED]
        f1 = per_country_f1(predictions, truths)
        assert f1["AA"] == pytest.approx(2 * 1 / (2 * 1 + 0 + 1), abs=1e-12)

    def test_display_name_first_seen(self):
        truths = [LocationTriple(country="Türkiye"), LocationTriple(country="TÜRKIYE")]
        predictions = [pred(country="türkiye")] * 2
        f1 = per_country_f1(predictions, truths)
        assert list(f1) == ["Türkiye"]


class TestCurve:
    def scored_fixture(self):
        aa = LocationTriple(country="AA")
        bb = LocationTriple(country="BB")
        scored = [(aa, 0.95), (bb, 0.55), (aa, 0.15)]
        truths = [aa, aa, aa]
        return scored, truths

    def test_hand_worked_points(self):
        scored, truths = self.scored_fixture()
        points = precision_coverage_curve(
            scored, truths, Granularity.COUNTRY, thresholds=[0.0, 0.5, 0.9]
        )
        assert [p[0] for p in points] == [0.0, 0.5, 0.9]
        coverages = [p[2] for p in points]
        precisions = [p[1] for p in points]
        assert coverages == pytest.approx([1.0, 2 / 3, 1 / 3], abs=1e-12)
        assert precisions == pytest.approx([2 / 3, 1 / 2, 1.0], abs=1e-12)

    def test_zero_threshold_point_equals_headline_metrics(self):
        scored, truths = self.scored_fixture()
        points = precision_coverage_curve(scored, truths, Granularity.COUNTRY, [0.0])
        predictions = [Prediction(t, s, not t.is_null()) for t, s in scored]
        m = compute_metrics(predictions, truths, Granularity.COUNTRY)
        assert points[0][1] == pytest.approx(m.precision, abs=1e-15)
        assert points[0][2] == pytest.approx(m.coverage, abs=1e-15)

    def test_default_thresholds_are_ten_tenths(self):
        scored, truths = self.scored_fixture()
        points = precision_coverage_curve(scored, truths, Granularity.COUNTRY)
        assert [p[0] for p in points] == [i / 10 for i in range(10)]
        assert len(DEFAULT_THRESHOLDS) == 10

    def test_coverage_non_increasing(self):
        scored, truths = self.scored_fixture()
        points = precision_coverage_curve(scored, truths, Granularity.COUNTRY)
        coverages = [p[2] for p in points]
        assert all(a >= b for a, b in zip(coverages, coverages[1:]))

    def test_thresholds_sorted_and_deduplicated(self):
        scored, truths = self.scored_fixture()
        points = precision_coverage_curve(
            scored, truths, Granularity.COUNTRY, [0.9, 0.0, 0.9, 0.5]
        )
        assert [p[0] for p in points] == [0.0, 0.5, 0.9]

    def test_null_stays_null_regardless_of_score(self):
        truths = [LocationTriple(country="AA")]
        points = precision_coverage_curve(
            [(LocationTriple(), 0.99)], truths, Granularity.COUNTRY, [0.0]
        )
        assert points[0][2] == 0.0 and math.isnan(points[0][1])

    def test_csv_shape(self):
        scored, truths = self.scored_fixture()
        by_level = {
            level: precision_coverage_curve(scored, truths, level)
            for level in Granularity
        }
        buf = io.StringIO()
        write_curve_csv(by_level, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == CURVE_CSV_HEADER
        assert len(lines) == 1 + 3 * 10
        assert lines[1].endswith(",country")


class TestBuckets:
    def index_with_counts(self, counts):
        provider = HashingEmbedder(dim=16)
        items = []
        for i, count in enumerate(counts):
            triple = LocationTriple(country=f"Land{i}")
            items.append((triple, IndexEntry(provider.embed([f"t{i}"])[0], count, 1)))
        return LocationIndex(items, 16, provider.tag)

    def test_bucket_labels(self):
        index = self.index_with_counts([0, 1, 2, 3, 1024])
        truths = [LocationTriple(country=f"Land{i}") for i in range(5)]
        predictions = [pred(country=f"Land{i}") for i in range(5)]
        got = mention_bucket_accuracy(predictions, truths, index, Granularity.COUNTRY)
        assert set(got) == {"zero", "0", "1", "10"}
        assert got["0"] == (1.0, 1)       # count 1 -> floor(log2 1) = 0
        assert got["1"] == (1.0, 2)       # counts 2 and 3 share floor(log2) = 1
        assert got["10"] == (1.0, 1)      # count 1024 -> 10
        assert got["zero"] == (1.0, 1)

    def test_unknown_truth_bucket(self):
        index = self.index_with_counts([1])
        truths = [LocationTriple(country="Nowhere")]
        got = mention_bucket_accuracy([NULL_PRED], truths, index, Granularity.COUNTRY)
        assert got == {"unknown": (0.0, 1)}

    def test_single_bucket_equals_overall_accuracy(self):
        index = self.index_with_counts([4])
        truths = [LocationTriple(country="Land0")] * 4
        predictions = [pred(country="Land0")] * 3 + [NULL_PRED]
        got = mention_bucket_accuracy(predictions, truths, index, Granularity.COUNTRY)
        overall = compute_metrics(predictions, truths, Granularity.COUNTRY).accuracy
        assert got["2"] == (overall, 4)

    def test_counts_sum_to_test_set_size(self):
        index = self.index_with_counts([0, 1, 5, 9])
        truths = [LocationTriple(country=f"Land{i % 4}") for i in range(20)]
        predictions = [pred(country="Land0")] * 20
        got = mention_bucket_accuracy(predictions, truths, index, Granularity.COUNTRY)
        assert sum(n for _, n in got.values()) == 20

    def test_numeric_buckets_ordered(self):
        index = self.index_with_counts([9, 1, 0, 300])
        truths = [LocationTriple(country=f"Land{i}") for i in range(4)]
        predictions = [pred(country=f"Land{i}") for i in range(4)]
        got = mention_bucket_accuracy(predictions, truths, index, Granularity.COUNTRY)
        assert list(got) == ["0", "3", "8", "zero"]


class TestSplit:
    def mentions(self, n):
        return [
            LabeledMention(f"text {i}", LocationTriple(country=f"C{i % 7}"))
            for i in range(n)
        ]

    def test_ninety_ten(self):
        train, test = split_train_test(self.mentions(10), 0.1, seed=1)
        assert len(train) == 9 and len(test) == 1

    def test_deterministic(self):
        mentions = self.mentions(50)
        assert split_train_test(mentions, 0.2, seed=5) == split_train_test(
            mentions, 0.2, seed=5
        )

    def test_seed_changes_membership(self):
        mentions = self.mentions(100)
        _, test_a = split_train_test(mentions, 0.3, seed=1)
        _, test_b = split_train_test(mentions, 0.3, seed=2)
        assert test_a != test_b

    def test_partition(self):
        mentions = self.mentions(37)
        train, test = split_train_test(mentions, 0.25, seed=9)
        assert len(train) + len(test) == 37
        combined = sorted(m.user_input for m in train + test)
        assert combined == sorted(m.user_input for m in mentions)

    @given(
        n=st.integers(min_value=1, max_value=200),
        fraction=st.floats(min_value=0.01, max_value=0.99),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_partition_property(self, n, fraction, seed):
        mentions = self.mentions(n)
        train, test = split_train_test(mentions, fraction, seed)
        assert len(test) == round(fraction * n)
        assert len(train) + len(test) == n
        seen = {id(m) for m in train} | {id(m) for m in test}
        assert len(seen) == n

    def test_validation(self):
        with pytest.raises(ValueError):
            split_train_test([], 0.5, 0)
        with pytest.raises(ValueError):
            split_train_test(self.mentions(5), 0.0, 0)
        with pytest.raises(ValueError):
            split_train_test(self.mentions(5), 1.0, 0)


class TestReport:
    def test_structure_and_json_safety(self, clean_corpus):
        provider = HashingEmbedder(128, 1)
        index = build_name_index(clean_corpus.entities, provider)
        mentions = clean_corpus.mentions[:150]
        truths = [m.truth for m in mentions]
        predictions = link_batch(index, provider, [m.user_input for m in mentions], 0.0)
        report = evaluation_report(predictions, truths, index=index, min_examples=5)
        text = json.dumps(report)  # must be JSON-serializable as-is
        assert set(report["levels"]) == {"country", "admin1", "city"}
        assert report["n"] == 150
        assert len(report["curve"]["country"]) == 10
        assert "buckets" in report
        assert json.loads(text)["levels"]["country"]["accuracy"] >= 0

    def test_nan_precision_becomes_null(self):
        truths = [LocationTriple(country="AA")]
        report = evaluation_report([NULL_PRED], truths)
        assert report["levels"]["country"]["precision"] is None
        parsed = json.loads(json.dumps(report))
        assert parsed["levels"]["country"]["precision"] is None
