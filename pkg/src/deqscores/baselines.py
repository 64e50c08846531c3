"""Reference methods the QP output is compared against.

All of them operate per reviewer and only ever move values inside a
quantization bin (a reviewer's papers sharing one score), preserving the bin
mean so the adjusted outputs stay centered on the reported score.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import DequantizedScores, PartialRanking, ReviewDataset

DEFAULT_EPSILON = 0.05


class NotTotalRanking(ValueError):
    """A reviewer's ranking does not order every pair of their papers."""


class GroupsInconsistent(ValueError):
    """The reported pairs do not form a total order over tie groups."""


class UnequalReviewCounts(ValueError):
    """The closed form requires every paper to have the same review count."""


@dataclass(frozen=True)
class QuantizationBin:
    """Papers sharing one quantized score within one reviewer's assignment."""

    reviewer_id: str
    score_value: int
    members: tuple[str, ...]


@dataclass(frozen=True)
class RankedGroup:
    """Mutually tied papers at one level of a reviewer's group-total order;
    higher ``group_index`` means ranked better."""

    group_index: int
    members: tuple[str, ...]


def quantization_bins(dataset: ReviewDataset, reviewer_id: str) -> list[QuantizationBin]:
    by_score: dict[int, list[str]] = {}
    for paper in dataset.assignment.papers_of_reviewer[reviewer_id]:
        by_score.setdefault(dataset.scores[(reviewer_id, paper)], []).append(paper)
    return [
        QuantizationBin(reviewer_id, score, tuple(sorted(papers)))
        for score, papers in sorted(by_score.items())
    ]


def quantized_baseline(dataset: ReviewDataset) -> DequantizedScores:
    """The reported scores themselves, as reals."""
    return DequantizedScores(values={pair: float(z) for pair, z in dataset.scores.items()})


def bre_adjusted_scores(
    dataset: ReviewDataset, epsilon: float = DEFAULT_EPSILON
) -> DequantizedScores:
    """Break ties inside each quantization bin by rank, preserving bin means.

    Requires a total ranking from every reviewer. Papers in a bin of size m
    get equally spaced epsilon increments by their rank within the bin and
    are then recentered onto the bin's score, which works out to
    z + epsilon * (rank_in_bin - 1/2 - m/2).
    """
    values: dict = {}
    for reviewer in sorted(dataset.assignment.reviewer_ids):
        papers = dataset.assignment.papers_of_reviewer[reviewer]
        ranking = dataset.ranking_of.get(
            reviewer, PartialRanking(reviewer_id=reviewer, ordered_pairs=frozenset())
        )
        if not ranking.is_total_over(papers):
            raise NotTotalRanking(f"reviewer {reviewer!r} has an incomplete ranking")
        beats = {p: 0 for p in papers}
        for better, _worse in ranking.ordered_pairs:
            beats[better] += 1
        for bin_ in quantization_bins(dataset, reviewer):
            members = sorted(bin_.members, key=lambda p: beats[p])
            raw = {
                p: bin_.score_value + position * epsilon
                for position, p in enumerate(members)
            }
            excess = sum(raw.values()) / len(members) - bin_.score_value
            for p in members:
                values[(reviewer, p)] = raw[p] - excess
    return DequantizedScores(values=values)


def ranked_groups(
    dataset: ReviewDataset, reviewer_id: str
) -> list[RankedGroup]:
    """Recover the tie groups of a reviewer's group-total order.

    Papers are grouped by how many papers they beat; the grouping is then
    verified to totally order the groups (every cross-group pair reported in
    the right direction, no within-group pair reported). Raises
    ``GroupsInconsistent`` when the reported pairs admit no such structure.
    """
    papers = dataset.assignment.papers_of_reviewer[reviewer_id]
    ranking = dataset.ranking_of.get(
        reviewer_id, PartialRanking(reviewer_id=reviewer_id, ordered_pairs=frozenset())
    )
    beats = {p: 0 for p in papers}
    for better, worse in ranking.ordered_pairs:
        beats[better] += 1
    levels: dict[int, list[str]] = {}
    for p in papers:
        levels.setdefault(beats[p], []).append(p)
    groups = [
        RankedGroup(group_index=i + 1, members=tuple(sorted(levels[k])))
        for i, k in enumerate(sorted(levels))
    ]
    verify_groups(dataset, reviewer_id, groups)
    return groups


def verify_groups(
    dataset: ReviewDataset, reviewer_id: str, groups: list[RankedGroup]
) -> None:
    papers = set(dataset.assignment.papers_of_reviewer[reviewer_id])
    ranking = dataset.ranking_of.get(
        reviewer_id, PartialRanking(reviewer_id=reviewer_id, ordered_pairs=frozenset())
    )
    listed = [p for g in groups for p in g.members]
    if sorted(listed) != sorted(papers):
        raise GroupsInconsistent(
            f"groups for reviewer {reviewer_id!r} do not partition the assigned papers"
        )
    level = {p: g.group_index for g in groups for p in g.members}
    pairs = ranking.ordered_pairs
    for i, p in enumerate(listed):
        for q in listed[i + 1 :]:
            reported = ((p, q) in pairs, (q, p) in pairs)
            if level[p] == level[q]:
                if any(reported):
                    raise GroupsInconsistent(
                        f"reviewer {reviewer_id!r}: tied papers {p!r}, {q!r} are ranked"
                    )
            else:
                expected = (level[p] > level[q], level[q] > level[p])
                if reported != expected:
                    raise GroupsInconsistent(
                        f"reviewer {reviewer_id!r}: pair ({p!r}, {q!r}) not ordered "
                        "as its groups require"
                    )


def partial_rankings_adjusted_scores(
    dataset: ReviewDataset,
    epsilon: float = DEFAULT_EPSILON,
    groups: dict[str, list[RankedGroup]] | None = None,
) -> DequantizedScores:
    """Group-wise tie breaking for group-total partial rankings.

    Within each quantization bin whose papers span more than one tie group,
    the t-th lowest group present gets offset t*epsilon (all its papers
    together) and the bin is recentered onto its score. Bins spanned by a
    single group keep the reported score. With all groups singletons this
    coincides with ``bre_adjusted_scores``.
    """
    values: dict = {}
    for reviewer in sorted(dataset.assignment.reviewer_ids):
        if groups is None:
            reviewer_groups = ranked_groups(dataset, reviewer)
        else:
            reviewer_groups = groups.get(reviewer, [])
            verify_groups(dataset, reviewer, reviewer_groups)
        level = {p: g.group_index for g in reviewer_groups for p in g.members}
        for bin_ in quantization_bins(dataset, reviewer):
            present = sorted({level[p] for p in bin_.members})
            if len(present) <= 1:
                for p in bin_.members:
                    values[(reviewer, p)] = float(bin_.score_value)
                continue
            offset_of = {g: t * epsilon for t, g in enumerate(present)}
            raw = {p: bin_.score_value + offset_of[level[p]] for p in bin_.members}
            excess = sum(raw.values()) / len(bin_.members) - bin_.score_value
            for p in bin_.members:
                values[(reviewer, p)] = raw[p] - excess
    return DequantizedScores(values=values)


def score_only_closed_form(dataset: ReviewDataset, lam: float) -> DequantizedScores:
    """Analytic scores-only solution: a convex combination of the paper's
    scores, clipped into the reporter's half-unit box.

    The weight on the reviewer's own score is (1 + mu*lam) / (mu*(1 + lam));
    every other reviewer of the paper gets 1 / (mu*(1 + lam)). Requires every
    paper to have the same review count mu; rankings are ignored.

    Caveat: when clipping is one-sided within a paper (possible once some
    |z_rp - mean| exceeds (1 + lam)/2) this closed form is only an
    approximation of the exact consensus+fit minimizer; see the tests for a
    worked instance.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    counts = {len(rs) for rs in dataset.assignment.reviewers_of_paper.values()}
    if len(counts) != 1:
        raise UnequalReviewCounts(f"papers have differing review counts {sorted(counts)}")
    mu = counts.pop()
    values: dict = {}
    denom = mu * (1.0 + lam)
    for (r, p), z in dataset.scores.items():
        others = sum(
            dataset.scores[(r2, p)]
            for r2 in dataset.assignment.reviewers_of_paper[p]
            if r2 != r
        )
        tilde = (1.0 + mu * lam) / denom * z + others / denom
        values[(r, p)] = float(min(max(tilde, z - 0.5), z + 0.5))
    return DequantizedScores(values=values)
