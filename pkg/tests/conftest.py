"""Shared builders for small hand-constructed datasets and test oracles."""

from __future__ import annotations

import numpy as np
import pytest

from deqscores.model import (
    Assignment,
    PartialRanking,
    ReviewDataset,
    ScoreScale,
)


def make_dataset(scores, ranking_pairs=None, scale=(0, 10)):
    """Build a dataset from {(reviewer, paper): score} and optional
    {reviewer: [(better, worse), ...]}."""
    rankings = []
    for reviewer, pairs in sorted((ranking_pairs or {}).items()):
        rankings.append(
            PartialRanking(reviewer_id=reviewer, ordered_pairs=frozenset(pairs))
        )
    return ReviewDataset(
        scale=ScoreScale(*scale),
        assignment=Assignment.from_pairs(scores.keys()),
        scores=dict(scores),
        rankings=tuple(rankings),
    )


@pytest.fixture
def one_reviewer_two_papers():
    return make_dataset(
        {("r1", "A"): 5, ("r1", "B"): 3},
        {"r1": [("A", "B")]},
    )


def likelihood_lattice_maximizer(dataset, sigma=1.0):
    """Zooming lattice search for the box-constrained joint-likelihood
    maximizer, profiling the paper qualities as each candidate's per-paper
    mean. Independent of the QP machinery; only usable for a handful of
    variables."""
    pairs = sorted(dataset.assignment.pairs)
    z = np.array([dataset.scores[p] for p in pairs], dtype=float)
    papers = sorted({p for _, p in pairs})
    membership = np.zeros((len(pairs), len(papers)))
    for row, (_, paper) in enumerate(pairs):
        membership[row, papers.index(paper)] = 1.0
    counts = membership.sum(axis=0)

    lo, hi = z - 0.5, z + 0.5
    window_lo, window_hi = lo.copy(), hi.copy()
    step = 0.05
    best = None
    for _ in range(7):
        axes = []
        for d in range(len(pairs)):
            pts = np.arange(window_lo[d], window_hi[d] + 1e-12, step)
            if pts.size == 0 or pts[-1] < window_hi[d] - 1e-12:
                pts = np.append(pts, window_hi[d])
            axes.append(pts)
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=1)
        means = (points @ membership) / counts
        residuals = points - means @ membership.T
        loglik = -(residuals**2).sum(axis=1) / (2.0 * sigma**2)
        best = points[int(np.argmax(loglik))]
        window_lo = np.maximum(lo, best - 1.5 * step)
        window_hi = np.minimum(hi, best + 1.5 * step)
        step /= 4.0
    return {pair: float(v) for pair, v in zip(pairs, best)}
