"""Trial-based experiment harness over synthetic or file-based review data.

Each (sweep value, trial) draws a fresh instance from a per-trial seed
derived from the master seed, runs every requested method against the latent
truth, and aggregates mean and standard error per method and metric. Trials
are independent, so they can run on worker processes without changing any
number in the report.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import (
    bre_adjusted_scores,
    partial_rankings_adjusted_scores,
    quantized_baseline,
)
from .dequantize import AUTO, DequantizerConfig, dequantize
from .io import prepare_half_scale
from .metrics import (
    ScoreVectorPair,
    kendall_tau_error,
    l2_error,
    project_to_original_scale,
    tie_fraction,
    trial_statistics,
)
from .model import DequantizedScores, ReviewDataset
from .qp import SolverSettings
from .qv import QVConfig, select_lambda
from .synth import SynthConfig, generate, trial_seed

REPORT_VERSION = 1

METHODS = ("proposed", "quantized", "bre_adjusted", "partial_rankings_adjusted")
SWEEPABLE = ("sigma", "papers_per_reviewer", "reviews_per_paper", "lambda")
METRIC_NAMES = ("kendall", "l2", "ties")


@dataclass(frozen=True)
class FileSource:
    """Raw ten-level score file re-prepared per trial (fresh retained reviews
    and assignment per trial seed)."""

    raw_path: str
    reviews_per_paper: int = 3
    papers_per_reviewer: int = 3


@dataclass(frozen=True)
class ExperimentSpec:
    methods: tuple[str, ...] = ("proposed", "quantized", "bre_adjusted")
    sweep_parameter: str = "sigma"
    sweep_values: tuple[float, ...] = (0.1, 0.5, 1.0)
    trials: int = 20
    base: SynthConfig | FileSource = field(default_factory=SynthConfig)
    metrics: tuple[str, ...] = ("kendall", "l2", "ties")
    epsilon: float = 0.05
    lam: float | str = AUTO
    seed: int = 0
    feasibility_tolerance: float = 1e-6
    jobs: int = 1

    def __post_init__(self) -> None:
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; known: {METHODS}")
        if self.sweep_parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.sweep_parameter!r}; known: {SWEEPABLE}")
        unknown = set(self.metrics) - set(METRIC_NAMES)
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}; known: {METRIC_NAMES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sweep_values:
            raise ValueError("sweep needs at least one value")
        if self.sweep_parameter == "lambda" and any(v <= 0 for v in self.sweep_values):
            raise ValueError("swept lambda values must be positive")


@dataclass
class ExperimentReport:
    parameters: dict
    results: list[dict]

    def cell(self, method: str, sweep_value, metric: str) -> dict:
        for row in self.results:
            if row["method"] == method and row["sweep_value"] == sweep_value:
                return row["metrics"][metric]
        raise KeyError((method, sweep_value, metric))

    def to_json(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "parameters": self.parameters,
            "results": self.results,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    def table(self) -> str:
        parameter = self.parameters.get("sweep_parameter", "value")
        lines = []
        for row in self.results:
            cells = "  ".join(
                f"{name}={m['mean']:.4f}±{m['sem']:.4f}"
                for name, m in sorted(row["metrics"].items())
            )
            lines.append(
                f"{row['method']:>28} @ {parameter}={row['sweep_value']}: {cells}"
            )
        return "\n".join(lines)


def _solver_settings(spec: ExperimentSpec) -> SolverSettings:
    return SolverSettings(feasibility_tolerance=spec.feasibility_tolerance)


def _instance_for(spec: ExperimentSpec, sweep_value, trial: int):
    """Build the (dataset, truth, projected-l2 flag) for one trial."""
    seed = trial_seed(spec.seed, trial)
    if isinstance(spec.base, FileSource):
        source = spec.base
        papers_per_reviewer = source.papers_per_reviewer
        reviews_per_paper = source.reviews_per_paper
        if spec.sweep_parameter == "papers_per_reviewer":
            papers_per_reviewer = int(sweep_value)
        elif spec.sweep_parameter == "reviews_per_paper":
            reviews_per_paper = int(sweep_value)
        dataset, truth = prepare_half_scale(
            source.raw_path,
            reviews_per_paper=reviews_per_paper,
            papers_per_reviewer=papers_per_reviewer,
            seed=seed,
        )
        return dataset, truth, True
    config = spec.base
    overrides: dict = {"seed": seed}
    if spec.sweep_parameter in ("sigma", "papers_per_reviewer", "reviews_per_paper"):
        key = spec.sweep_parameter
        overrides[key] = type(getattr(config, key))(sweep_value)
    instance = generate(dataclasses.replace(config, **overrides))
    return instance.dataset, instance.truth_y, False


def _run_method(
    method: str,
    dataset: ReviewDataset,
    epsilon: float,
    lam,
    solver: SolverSettings,
) -> tuple[DequantizedScores, float | None]:
    """Returns the method's scores and, for the proposed method under AUTO,
    the selected fit weight."""
    if method == "proposed":
        selected = None
        if lam == AUTO:
            report = select_lambda(
                dataset, QVConfig(), DequantizerConfig(lam=1.0, epsilon=epsilon, solver=solver)
            )
            lam = report.selected_lambda
            selected = lam
        scores = dequantize(
            dataset, DequantizerConfig(lam=lam, epsilon=epsilon, solver=solver)
        )
        return scores, selected
    if method == "quantized":
        return quantized_baseline(dataset), None
    if method == "bre_adjusted":
        # group-wise adjustment generalizes the rank-wise one and coincides
        # with it on total rankings, so tied inputs degrade gracefully
        total = all(
            dataset.ranking_of[r].is_total_over(papers)
            if r in dataset.ranking_of
            else len(papers) <= 1
            for r, papers in dataset.assignment.papers_of_reviewer.items()
        )
        if total:
            return bre_adjusted_scores(dataset, epsilon), None
        return partial_rankings_adjusted_scores(dataset, epsilon), None
    if method == "partial_rankings_adjusted":
        return partial_rankings_adjusted_scores(dataset, epsilon), None
    raise ValueError(f"unknown method {method!r}")


def _evaluate(estimate: DequantizedScores, truth, metrics, project_l2: bool) -> dict:
    out: dict = {}
    if "kendall" in metrics:
        out["kendall"] = kendall_tau_error(
            ScoreVectorPair(truth=truth, estimate=estimate.values, truth_tie_tolerance=1e-12)
        )
    if "l2" in metrics:
        if project_l2:
            projected = {k: float(project_to_original_scale(v)) for k, v in estimate.values.items()}
            out["l2"] = l2_error(ScoreVectorPair(truth=truth, estimate=projected))
        else:
            out["l2"] = l2_error(ScoreVectorPair(truth=truth, estimate=estimate.values))
    if "ties" in metrics:
        out["ties"] = tie_fraction(estimate.values)
    return out


def _run_trial(spec: ExperimentSpec, sweep_value, trial: int) -> dict:
    dataset, truth, project_l2 = _instance_for(spec, sweep_value, trial)
    solver = _solver_settings(spec)
    lam = spec.lam
    if spec.sweep_parameter == "lambda":
        lam = float(sweep_value)
    row: dict = {}
    for method in spec.methods:
        scores, selected = _run_method(method, dataset, spec.epsilon, lam, solver)
        row[method] = {
            "metrics": _evaluate(scores, truth, spec.metrics, project_l2),
            "selected_lambda": selected,
        }
    return row


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run every (sweep value, trial) cell and aggregate with mean/SEM.

    A failing trial aborts the run with its sweep value and trial index in
    the exception context.
    """
    per_value_rows: dict = {}
    for sweep_value in spec.sweep_values:
        tasks = list(range(spec.trials))
        if spec.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                trial_rows = list(
                    pool.map(_trial_worker, [(spec, sweep_value, t) for t in tasks])
                )
        else:
            trial_rows = [_run_trial_with_context(spec, sweep_value, t) for t in tasks]
        per_value_rows[sweep_value] = trial_rows

    results = []
    for sweep_value in spec.sweep_values:
        trial_rows = per_value_rows[sweep_value]
        for method in spec.methods:
            metric_cells = {}
            for metric in spec.metrics:
                values = [row[method]["metrics"][metric] for row in trial_rows]
                mean, sem = trial_statistics(values)
                metric_cells[metric] = {"mean": mean, "sem": sem, "trials": values}
            selected = [row[method]["selected_lambda"] for row in trial_rows]
            entry = {
                "method": method,
                "sweep_value": sweep_value,
                "metrics": metric_cells,
            }
            if any(s is not None for s in selected):
                entry["selected_lambdas"] = selected
            results.append(entry)

    parameters = {
        "methods": list(spec.methods),
        "sweep_parameter": spec.sweep_parameter,
        "sweep_values": list(spec.sweep_values),
        "trials": spec.trials,
        "metrics": list(spec.metrics),
        "epsilon": spec.epsilon,
        "lambda": spec.lam,
        "seed": spec.seed,
        "feasibility_tolerance": spec.feasibility_tolerance,
        "base": dataclasses.asdict(spec.base),
        "base_kind": "file" if isinstance(spec.base, FileSource) else "synthetic",
    }
    return ExperimentReport(parameters=parameters, results=results)


def _run_trial_with_context(spec: ExperimentSpec, sweep_value, trial: int) -> dict:
    try:
        return _run_trial(spec, sweep_value, trial)
    except Exception as exc:
        raise RuntimeError(
            f"trial {trial} at {spec.sweep_parameter}={sweep_value} failed: {exc}"
        ) from exc


def _trial_worker(args) -> dict:
    spec, sweep_value, trial = args
    return _run_trial_with_context(spec, sweep_value, trial)
