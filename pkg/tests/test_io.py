import math
from pathlib import Path

import pytest

from deqscores.dequantize import DequantizerConfig, dequantize
from deqscores.io import (
    InsufficientReviews,
    ParseError,
    load_reviews,
    load_scores,
    prepare_half_scale,
    write_scores,
    write_synthetic,
)
from deqscores.metrics import percentiles
from deqscores.model import ValidationError, derive_rankings_from_raw_scores
from deqscores.synth import SynthConfig, generate

DATA = Path(__file__).parent / "data"

# frozen output of prepare_half_scale(raw_ten_level.csv, 3, 3, seed=0):
# (reviewer, paper) -> (retained raw value, coarse score)
GOLDEN_PREPARED = {
    ("r0", "paper04"): (2.0, 1), ("r0", "paper05"): (6.0, 3), ("r0", "paper08"): (6.0, 3),
    ("r1", "paper03"): (8.0, 4), ("r1", "paper04"): (9.0, 5), ("r1", "paper09"): (4.0, 2),
    ("r2", "paper02"): (1.0, 1), ("r2", "paper03"): (8.0, 4), ("r2", "paper05"): (7.0, 4),
    ("r3", "paper04"): (4.0, 2), ("r3", "paper07"): (9.0, 5), ("r3", "paper10"): (7.0, 4),
    ("r4", "paper01"): (10.0, 5), ("r4", "paper07"): (8.0, 4), ("r4", "paper08"): (1.0, 1),
    ("r5", "paper01"): (7.0, 4), ("r5", "paper02"): (2.0, 1), ("r5", "paper10"): (8.0, 4),
    ("r6", "paper01"): (7.0, 4), ("r6", "paper03"): (8.0, 4), ("r6", "paper06"): (3.0, 2),
    ("r7", "paper05"): (6.0, 3), ("r7", "paper08"): (5.0, 3), ("r7", "paper09"): (4.0, 2),
    ("r8", "paper02"): (5.0, 3), ("r8", "paper06"): (3.0, 2), ("r8", "paper07"): (10.0, 5),
    ("r9", "paper06"): (4.0, 2), ("r9", "paper09"): (7.0, 4), ("r9", "paper10"): (1.0, 1),
}

RAW_INPUT = {
    "paper01": [10, 7, 7],
    "paper02": [1, 3, 2, 5],
    "paper03": [8, 8, 8, 8],
    "paper04": [2, 9, 4],
    "paper05": [5, 6, 5, 7, 6],
    "paper06": [3, 3, 4],
    "paper07": [9, 10, 8, 10],
    "paper08": [6, 1, 5],
    "paper09": [4, 4, 7, 2],
    "paper10": [7, 5, 3, 8, 1],
}


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class TestLoadReviews:
    def test_reviews_without_rankings(self, tmp_path):
        path = tmp_path / "reviews.csv"
        write_csv(path, ["reviewer_id", "paper_id", "score"],
                  [("r1", "A", 5), ("r1", "B", 3), ("r2", "A", 4)])
        ds = load_reviews(path)
        assert ds.num_reviews == 3
        assert ds.rankings == ()
        assert (ds.scale.lower_bound, ds.scale.upper_bound) == (3, 5)

    def test_duplicate_review_row_names_the_line(self, tmp_path):
        path = tmp_path / "reviews.csv"
        write_csv(path, ["reviewer_id", "paper_id", "score"],
                  [("r1", "A", 5), ("r1", "A", 4)])
        with pytest.raises(ParseError) as err:
            load_reviews(path)
        assert err.value.line == 3

    def test_non_integer_score_rejected(self, tmp_path):
        path = tmp_path / "reviews.csv"
        write_csv(path, ["reviewer_id", "paper_id", "score"], [("r1", "A", "x")])
        with pytest.raises(ParseError):
            load_reviews(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "reviews.csv"
        write_csv(path, ["who", "what", "score"], [("r1", "A", 5)])
        with pytest.raises(ParseError):
            load_reviews(path)

    def test_ranking_over_unreviewed_paper_fails_validation(self, tmp_path):
        reviews = tmp_path / "reviews.csv"
        rankings = tmp_path / "rankings.csv"
        write_csv(reviews, ["reviewer_id", "paper_id", "score"], [("r1", "A", 5)])
        write_csv(rankings, ["reviewer_id", "better_paper_id", "worse_paper_id"],
                  [("r1", "A", "Z")])
        with pytest.raises(ValidationError):
            load_reviews(reviews, rankings)

    def test_explicit_scale_is_enforced(self, tmp_path):
        path = tmp_path / "reviews.csv"
        write_csv(path, ["reviewer_id", "paper_id", "score"], [("r1", "A", 9)])
        with pytest.raises(ValidationError):
            load_reviews(path, scale=(1, 5))


class TestWriteScores:
    def test_rows_sorted_per_paper_best_first(self, tmp_path):
        instance = generate(SynthConfig(num_papers=6, reviews_per_paper=2,
                                        papers_per_reviewer=2, seed=4))
        scores = dequantize(instance.dataset, DequantizerConfig(lam=2.0))
        out = tmp_path / "out.csv"
        write_scores(scores, instance.dataset, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "reviewer_id,paper_id,quantized_score,dequantized_score,percentile"
        papers = [line.split(",")[1] for line in lines[1:]]
        assert papers == sorted(papers)
        values_by_paper: dict = {}
        for line in lines[1:]:
            _, paper, _, value, _ = line.split(",")
            values_by_paper.setdefault(paper, []).append(float(value))
        for vals in values_by_paper.values():
            assert vals == sorted(vals, reverse=True)

    def test_rewrite_is_byte_identical(self, tmp_path):
        instance = generate(SynthConfig(num_papers=6, reviews_per_paper=2,
                                        papers_per_reviewer=2, seed=4))
        scores = dequantize(instance.dataset, DequantizerConfig(lam=2.0))
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        write_scores(scores, instance.dataset, first)
        write_scores(scores, instance.dataset, second)
        assert first.read_bytes() == second.read_bytes()

    def test_round_trip_preserves_twelve_digits(self, tmp_path):
        instance = generate(SynthConfig(num_papers=6, reviews_per_paper=2,
                                        papers_per_reviewer=2, seed=4))
        scores = dequantize(instance.dataset, DequantizerConfig(lam=2.0))
        out = tmp_path / "out.csv"
        write_scores(scores, instance.dataset, out)
        reloaded = load_scores(out)
        for pair, value in scores.values.items():
            assert reloaded[pair] == pytest.approx(value, rel=1e-11, abs=1e-11)

    def test_percentile_column_delegates_to_metrics(self, tmp_path):
        instance = generate(SynthConfig(num_papers=6, reviews_per_paper=2,
                                        papers_per_reviewer=2, seed=4))
        scores = dequantize(instance.dataset, DequantizerConfig(lam=2.0))
        out = tmp_path / "out.csv"
        write_scores(scores, instance.dataset, out)
        expected = percentiles(scores.values)
        for line in out.read_text().splitlines()[1:]:
            reviewer, paper, _, _, pct = line.split(",")
            assert float(pct) == pytest.approx(expected[(reviewer, paper)], rel=1e-11)


class TestPrepareHalfScale:
    def test_golden_preparation(self):
        ds, truth = prepare_half_scale(
            DATA / "raw_ten_level.csv", reviews_per_paper=3, papers_per_reviewer=3, seed=0
        )
        assert {k: (truth[k], ds.scores[k]) for k in truth} == GOLDEN_PREPARED

    def test_half_scale_map_per_row(self):
        ds, truth = prepare_half_scale(DATA / "raw_ten_level.csv", seed=0)
        for pair, y in truth.items():
            assert ds.scores[pair] == math.ceil(y / 2.0)
            assert 1 <= ds.scores[pair] <= 5

    def test_exactly_three_reviews_retained_from_input(self):
        ds, truth = prepare_half_scale(DATA / "raw_ten_level.csv", seed=0)
        for paper, reviewers in ds.assignment.reviewers_of_paper.items():
            assert len(reviewers) == 3
            kept = sorted(truth[(r, paper)] for r in reviewers)
            available = sorted(RAW_INPUT[paper])
            for value in kept:
                available.remove(value)  # retained values are a sub-multiset

    def test_papers_with_exactly_three_reviews_keep_all(self):
        ds, truth = prepare_half_scale(DATA / "raw_ten_level.csv", seed=0)
        for paper in ("paper01", "paper04", "paper06", "paper08"):
            kept = sorted(
                truth[(r, paper)] for r in ds.assignment.reviewers_of_paper[paper]
            )
            assert kept == sorted(float(v) for v in RAW_INPUT[paper])

    def test_rankings_re_derived_from_raw_values(self):
        ds, truth = prepare_half_scale(DATA / "raw_ten_level.csv", seed=0)
        expected = {r.reviewer_id: r.ordered_pairs for r in derive_rankings_from_raw_scores(truth)}
        actual = {r.reviewer_id: r.ordered_pairs for r in ds.rankings}
        assert actual == expected

    def test_within_bin_pairs_survive(self):
        # raw 7 vs 8 quantize to the same coarse score but stay ranked
        ds, truth = prepare_half_scale(DATA / "raw_ten_level.csv", seed=0)
        found = False
        for r, better, worse in ds.ranking_pairs():
            if ds.scores[(r, better)] == ds.scores[(r, worse)]:
                assert truth[(r, better)] > truth[(r, worse)]
                found = True
        assert found

    def test_deterministic_per_seed(self):
        a = prepare_half_scale(DATA / "raw_ten_level.csv", seed=3)
        b = prepare_half_scale(DATA / "raw_ten_level.csv", seed=3)
        assert a[0].scores == b[0].scores and a[1] == b[1]

    def test_insufficient_reviews_rejected(self, tmp_path):
        path = tmp_path / "raw.csv"
        write_csv(path, ["paper_id", "score"], [("p1", 5), ("p1", 6), ("p2", 7)])
        with pytest.raises(InsufficientReviews):
            prepare_half_scale(path, reviews_per_paper=3, papers_per_reviewer=1)

    def test_out_of_range_raw_score_rejected(self, tmp_path):
        path = tmp_path / "raw.csv"
        write_csv(path, ["paper_id", "score"], [("p1", 11)])
        with pytest.raises(ParseError):
            prepare_half_scale(path)


class TestWriteSynthetic:
    def test_round_trip_through_loader(self, tmp_path):
        instance = generate(SynthConfig(num_papers=6, reviews_per_paper=2,
                                        papers_per_reviewer=2, seed=19))
        reviews, rankings, _ = write_synthetic(instance, tmp_path / "demo")
        ds = load_reviews(reviews, rankings, scale=(0, 10))
        assert ds.scores == instance.dataset.scores
        assert {r.reviewer_id: r.ordered_pairs for r in ds.rankings} == {
            r.reviewer_id: r.ordered_pairs for r in instance.dataset.rankings if r.ordered_pairs
        }
