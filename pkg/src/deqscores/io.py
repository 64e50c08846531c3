"""CSV ingestion and serialization, plus coarse-scale preprocessing of raw
ten-level review files.

Formats (UTF-8, header row required, '.' decimal separator):

    reviews.csv   reviewer_id,paper_id,score
    rankings.csv  reviewer_id,better_paper_id,worse_paper_id
    raw scores    paper_id,score            (for ``prepare_half_scale``)
    output.csv    reviewer_id,paper_id,quantized_score,dequantized_score,percentile
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .metrics import percentiles
from .model import (
    Assignment,
    DequantizedScores,
    Pair,
    PartialRanking,
    ReviewDataset,
    ScoreScale,
    derive_rankings_from_raw_scores,
    require_valid,
)
from .synth import random_regular_assignment


class ParseError(Exception):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class InsufficientReviews(ValueError):
    pass


def _read_rows(path, expected_header: list[str]):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise ParseError(path, 1, f"expected header {','.join(expected_header)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(expected_header):
                raise ParseError(path, line_no, f"expected {len(expected_header)} fields")
            yield line_no, [cell.strip() for cell in row]


def load_reviews(
    reviews_path,
    rankings_path=None,
    scale: tuple[int, int] | None = None,
) -> ReviewDataset:
    """Parse reviews (and optional rankings) into a validated dataset.

    Without an explicit ``scale`` the bounds are inferred as the min/max
    observed score (widened by one when all scores coincide). Parse problems
    raise ``ParseError`` with the offending line; a dataset violating the
    model invariants raises ``ValidationError`` listing every violation.
    """
    scores: dict[Pair, int] = {}
    for line_no, (reviewer, paper, score_text) in _read_rows(
        reviews_path, ["reviewer_id", "paper_id", "score"]
    ):
        try:
            score = int(score_text)
        except ValueError:
            raise ParseError(reviews_path, line_no, f"score {score_text!r} is not an integer")
        if (reviewer, paper) in scores:
            raise ParseError(reviews_path, line_no, f"duplicate review ({reviewer}, {paper})")
        scores[(reviewer, paper)] = score

    ranking_pairs: dict[str, set[Pair]] = {}
    if rankings_path is not None:
        for line_no, (reviewer, better, worse) in _read_rows(
            rankings_path, ["reviewer_id", "better_paper_id", "worse_paper_id"]
        ):
            ranking_pairs.setdefault(reviewer, set()).add((better, worse))

    if scale is None:
        if not scores:
            raise ParseError(reviews_path, 2, "no reviews")
        lo = min(scores.values())
        hi = max(scores.values())
        scale = (lo, hi if hi > lo else lo + 1)

    dataset = ReviewDataset(
        scale=ScoreScale(*scale),
        assignment=Assignment.from_pairs(scores.keys()),
        scores=scores,
        rankings=tuple(
            PartialRanking(reviewer_id=r, ordered_pairs=frozenset(pairs))
            for r, pairs in sorted(ranking_pairs.items())
        ),
    )
    require_valid(dataset)
    return dataset


def write_scores(scores: DequantizedScores, dataset: ReviewDataset, path) -> None:
    """Write per-review output rows, one paper block at a time, best first.

    Rows are sorted by (paper_id, dequantized score descending, reviewer_id)
    and floats printed with 12 significant digits, so rewriting the same
    result is byte-identical and a reload preserves values.
    """
    pct = percentiles(scores.values)
    rows = sorted(
        scores.values.items(), key=lambda kv: (kv[0][1], -kv[1], kv[0][0])
    )
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["reviewer_id", "paper_id", "quantized_score", "dequantized_score", "percentile"]
        )
        for (reviewer, paper), value in rows:
            writer.writerow(
                [
                    reviewer,
                    paper,
                    dataset.scores[(reviewer, paper)],
                    format(value, ".12g"),
                    format(pct[(reviewer, paper)], ".12g"),
                ]
            )


def load_scores(path) -> dict[Pair, float]:
    """Read back the (reviewer, paper) -> dequantized value column of an
    output file."""
    values: dict[Pair, float] = {}
    for line_no, row in _read_rows(
        path, ["reviewer_id", "paper_id", "quantized_score", "dequantized_score", "percentile"]
    ):
        try:
            values[(row[0], row[1])] = float(row[3])
        except ValueError:
            raise ParseError(path, line_no, f"bad dequantized value {row[3]!r}")
    return values


def prepare_half_scale(
    raw_path,
    reviews_per_paper: int = 3,
    papers_per_reviewer: int = 3,
    seed: int = 0,
) -> tuple[ReviewDataset, dict[Pair, float]]:
    """Preprocess a raw ten-level score file into a coarse five-level dataset.

    Per paper, exactly ``reviews_per_paper`` reviews are retained (surplus
    dropped uniformly at random, seeded). Because raw files carry no reviewer
    identities, a random regular assignment at the requested
    ``papers_per_reviewer`` load is synthesized over the retained reviews.
    Scores become ceil(y/2) on a 1..5 scale; rankings are derived from the
    raw values by strict comparison; the retained raw values are returned as
    evaluation truth.
    """
    raw_by_paper: dict[str, list[int]] = {}
    for line_no, (paper, score_text) in _read_rows(raw_path, ["paper_id", "score"]):
        try:
            score = int(score_text)
        except ValueError:
            raise ParseError(raw_path, line_no, f"score {score_text!r} is not an integer")
        if not 1 <= score <= 10:
            raise ParseError(raw_path, line_no, f"raw score {score} outside 1..10")
        raw_by_paper.setdefault(paper, []).append(score)

    short = sorted(p for p, v in raw_by_paper.items() if len(v) < reviews_per_paper)
    if short:
        raise InsufficientReviews(
            f"{len(short)} paper(s) have fewer than {reviews_per_paper} reviews "
            f"(first: {short[0]!r})"
        )

    papers = sorted(raw_by_paper)
    total = len(papers) * reviews_per_paper
    if total % papers_per_reviewer:
        raise ValueError(
            f"{len(papers)} papers x {reviews_per_paper} reviews is not divisible by "
            f"a reviewer load of {papers_per_reviewer}"
        )
    num_reviewers = total // papers_per_reviewer

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    retained: dict[str, list[int]] = {}
    for paper in papers:
        values = raw_by_paper[paper]
        keep = rng.choice(len(values), size=reviews_per_paper, replace=False)
        retained[paper] = [values[i] for i in sorted(keep)]

    assignment = random_regular_assignment(
        len(papers),
        num_reviewers,
        papers_per_reviewer,
        reviews_per_paper,
        rng,
        paper_ids=papers,
    )
    truth_y: dict[Pair, float] = {}
    for paper in papers:
        reviewers = assignment.reviewers_of_paper[paper]
        for reviewer, value in zip(reviewers, retained[paper]):
            truth_y[(reviewer, paper)] = float(value)

    scores = {pair: math.ceil(y / 2.0) for pair, y in truth_y.items()}
    dataset = ReviewDataset(
        scale=ScoreScale(1, 5),
        assignment=assignment,
        scores=scores,
        rankings=tuple(derive_rankings_from_raw_scores(truth_y)),
    )
    require_valid(dataset)
    return dataset, truth_y


def write_synthetic(instance, prefix) -> tuple[Path, Path, Path]:
    """Write a generated instance as reviews/rankings/truth CSV files."""
    prefix = Path(prefix)
    reviews_path = prefix.with_name(prefix.name + "_reviews.csv")
    rankings_path = prefix.with_name(prefix.name + "_rankings.csv")
    truth_path = prefix.with_name(prefix.name + "_truth.csv")
    with open(reviews_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["reviewer_id", "paper_id", "score"])
        for (reviewer, paper), z in sorted(instance.dataset.scores.items()):
            writer.writerow([reviewer, paper, z])
    with open(rankings_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["reviewer_id", "better_paper_id", "worse_paper_id"])
        for reviewer, better, worse in instance.dataset.ranking_pairs():
            writer.writerow([reviewer, better, worse])
    with open(truth_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["reviewer_id", "paper_id", "true_value"])
        for (reviewer, paper), y in sorted(instance.truth_y.items()):
            writer.writerow([reviewer, paper, format(y, ".12g")])
    return reviews_path, rankings_path, truth_path
