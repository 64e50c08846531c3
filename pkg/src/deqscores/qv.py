"""Data-driven fit-weight selection by re-quantization.

The observed scores are coarsened through a monotone quantizer; rankings are
re-derived from the *original* scores by strict comparison (so information
lost to the coarser bins survives as ranking pairs). Each candidate weight
then dequantizes the coarsened data, scored by how well it recovers the
ordering of the original scores. The winner is the candidate with the
smallest validation error, ties broken toward the smallest value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dequantize import DequantizerConfig, assemble
from .metrics import ScoreVectorPair, kendall_tau_error
from .model import (
    Pair,
    ReviewDataset,
    ScoreScale,
    derive_rankings_from_raw_scores,
    require_valid,
)
from .qp import solve


class DegenerateValidation(ValueError):
    """The dataset carries no signal the validation could score against."""


def default_lambda_grid() -> tuple[float, ...]:
    """Exponential grid exp(t/4) for t = 0..39."""
    return tuple(math.exp(t / 4.0) for t in range(40))


def halve_score(z: int) -> int:
    """Default coarsener: ceil(z / 2)."""
    return math.ceil(z / 2)


LOSSES: dict[str, Callable[[ScoreVectorPair], float]] = {
    "kendall": kendall_tau_error,
}


@dataclass(frozen=True)
class QVConfig:
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    quantizer: Callable[[int], int] = halve_score
    loss: str = "kendall"

    def __post_init__(self) -> None:
        grid = self.lambda_grid
        if not grid or any(g <= 0 for g in grid):
            raise ValueError("lambda grid must be nonempty and positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; known: {sorted(LOSSES)}")


@dataclass(frozen=True)
class QVReport:
    lambdas: tuple[float, ...]
    errors: tuple[float, ...]
    selected_lambda: float
    selected_index: int

    @property
    def selected_error(self) -> float:
        return self.errors[self.selected_index]


def coarsen(dataset: ReviewDataset, quantizer: Callable[[int], int] = halve_score) -> ReviewDataset:
    """Coarsened copy: scores pushed through the quantizer, rankings re-derived
    from the original scores by strict comparison, scale mapped endpoint-wise.

    Raises ``DegenerateValidation`` when the quantizer collapses the whole
    scale to a single level.
    """
    require_valid(dataset)
    scale = dataset.scale
    mapped = [quantizer(v) for v in range(scale.lower_bound, scale.upper_bound + 1)]
    if any(b < a for a, b in zip(mapped, mapped[1:])):
        raise ValueError("quantizer must be monotone nondecreasing on the scale")
    if mapped[0] == mapped[-1]:
        raise DegenerateValidation("quantizer collapses the scale to one level")

    coarse_scores = {pair: quantizer(z) for pair, z in dataset.scores.items()}
    raw: dict[Pair, float] = {pair: float(z) for pair, z in dataset.scores.items()}
    rankings = tuple(derive_rankings_from_raw_scores(raw))
    return ReviewDataset(
        scale=ScoreScale(mapped[0], mapped[-1]),
        assignment=dataset.assignment,
        scores=coarse_scores,
        rankings=rankings,
    )


def select_lambda(
    dataset: ReviewDataset,
    config: QVConfig = QVConfig(),
    deq_config: DequantizerConfig = DequantizerConfig(lam=1.0),
) -> QVReport:
    """Evaluate every candidate weight on the coarsened dataset and pick the
    one whose dequantization best recovers the original score ordering.

    Candidates are solved in ascending order, warm-starting each solve from
    the previous solution (the minimizer is unique, so this only saves
    iterations). The original scores act as validation truth with exact-tie
    omission; all-tied originals raise ``DegenerateValidation``.
    """
    require_valid(dataset)
    truth = {pair: float(z) for pair, z in dataset.scores.items()}
    if len(set(truth.values())) < 2:
        raise DegenerateValidation("all original scores are tied; loss is undefined")

    coarse = coarsen(dataset, config.quantizer)
    loss = LOSSES[config.loss]
    index = coarse.pair_index

    errors: list[float] = []
    start: np.ndarray | None = None
    for lam in config.lambda_grid:
        problem = assemble(
            coarse,
            DequantizerConfig(lam=lam, epsilon=deq_config.epsilon, solver=deq_config.solver),
        )
        solution = solve(problem, deq_config.solver, start=start)
        start = solution.values
        estimate = {pair: float(solution.values[i]) for pair, i in index.items()}
        errors.append(loss(ScoreVectorPair(truth=truth, estimate=estimate)))

    best = min(range(len(errors)), key=lambda i: (errors[i], config.lambda_grid[i]))
    return QVReport(
        lambdas=tuple(config.lambda_grid),
        errors=tuple(errors),
        selected_lambda=config.lambda_grid[best],
        selected_index=best,
    )
