"""Command-line interface.

Commands: ``validate``, ``dequantize``, ``simulate``, ``qv``, ``baseline``,
``experiment``. Exit codes: 0 success, 1 usage problem, 2 validation
failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import baselines, io
from .dequantize import AUTO, DequantizerConfig, consistency_report, dequantize
from .experiment import ExperimentSpec, FileSource, run_experiment
from .model import ValidationError, validate
from .qp import SolverError, SolverSettings
from .qv import QVConfig, select_lambda
from .synth import SynthConfig, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_lambda(text: str):
    if text.lower() == AUTO:
        return AUTO
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--lambda must be a positive number or 'auto', got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError("--lambda must be positive")
    return value


def _add_dataset_args(parser: _Parser) -> None:
    parser.add_argument("--reviews", required=True, help="reviews CSV (reviewer_id,paper_id,score)")
    parser.add_argument(
        "--rankings", help="rankings CSV (reviewer_id,better_paper_id,worse_paper_id)"
    )
    parser.add_argument(
        "--scale", nargs=2, type=int, metavar=("LO", "HI"),
        help="score scale bounds (default: inferred from the data)",
    )


def _add_shared_args(parser: _Parser) -> None:
    parser.add_argument("--epsilon", type=float, default=0.05, help="ranking separation (default 0.05)")
    parser.add_argument(
        "--lambda", dest="lam", type=_parse_lambda, default=AUTO,
        help="fit weight, or 'auto' to select by quantization validation (default auto)",
    )
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument(
        "--feastol", type=float, default=1e-6, help="solver feasibility tolerance (default 1e-6)"
    )


def _load(args):
    scale = tuple(args.scale) if args.scale else None
    return io.load_reviews(args.reviews, args.rankings, scale=scale)


def _parameters(args, keys) -> dict:
    return {key: getattr(args, key) for key in keys}


def build_parser() -> _Parser:
    parser = _Parser(prog="deqscores", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dataset against the model invariants")
    _add_dataset_args(p)

    p = sub.add_parser("dequantize", help="merge scores and rankings into real-valued scores")
    _add_dataset_args(p)
    _add_shared_args(p)
    p.add_argument("--output", required=True, help="output CSV path")
    p.add_argument("--report", help="optional JSON run report path")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--papers", type=int, default=60)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--reviews-per-paper", type=int, default=4)
    p.add_argument("--papers-per-reviewer", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-prefix", required=True, help="prefix for *_reviews/_rankings/_truth.csv")

    p = sub.add_parser("qv", help="select the fit weight by quantization validation")
    _add_dataset_args(p)
    _add_shared_args(p)
    p.add_argument("--output", help="optional JSON report path")

    p = sub.add_parser("baseline", help="run a reference method")
    p.add_argument(
        "--method", required=True,
        choices=["quantized", "bre_adjusted", "partial_rankings_adjusted"],
    )
    _add_dataset_args(p)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--output", required=True, help="output CSV path")

    p = sub.add_parser("experiment", help="run trial sweeps and aggregate errors")
    _add_shared_args(p)
    p.add_argument(
        "--sweep", default="sigma",
        choices=["sigma", "papers_per_reviewer", "reviews_per_paper", "lambda"],
    )
    p.add_argument("--values", default="0.1,0.5,1.0", help="comma-separated sweep values")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument(
        "--methods", default="proposed,quantized,bre_adjusted",
        help="comma-separated subset of proposed,quantized,bre_adjusted,partial_rankings_adjusted",
    )
    p.add_argument("--metrics", default="kendall,l2,ties", help="comma-separated subset of kendall,l2,ties")
    p.add_argument("--papers", type=int, default=60, help="synthetic papers (default 60)")
    p.add_argument("--sigma", type=float, default=0.5, help="synthetic noise level (default 0.5)")
    p.add_argument("--reviews-per-paper", type=int, default=4)
    p.add_argument("--papers-per-reviewer", type=int, default=4)
    p.add_argument("--raw-scores", help="raw ten-level score CSV; trials re-prepare it instead of simulating")
    p.add_argument("--jobs", type=int, default=1, help="parallel trial workers (default 1)")
    p.add_argument("--output", required=True, help="JSON report path")
    p.add_argument("--table", help="optional per-sweep CSV (method,sweep_value,metric,mean,sem)")
    return parser


def _cmd_validate(args) -> int:
    try:
        _load(args)
    except ValidationError as exc:
        for violation in exc.violations:
            print(violation)
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def _cmd_dequantize(args) -> int:
    dataset = _load(args)
    settings = SolverSettings(feasibility_tolerance=args.feastol)
    lam = args.lam
    selected = None
    if lam == AUTO:
        report = select_lambda(
            dataset, QVConfig(), DequantizerConfig(lam=1.0, epsilon=args.epsilon, solver=settings)
        )
        lam = selected = report.selected_lambda
    config = DequantizerConfig(lam=lam, epsilon=args.epsilon, solver=settings)
    scores = dequantize(dataset, config)
    io.write_scores(scores, dataset, args.output)
    box_viol, margin = consistency_report(dataset, scores, args.epsilon)
    print(f"wrote {args.output} ({dataset.num_reviews} reviews)")
    if selected is not None:
        print(f"selected lambda: {selected:.6g}")
    print(f"max box violation: {box_viol:.3g}; min ranked-pair margin: {margin:.6g}")
    if args.report:
        Path(args.report).write_text(
            json.dumps(
                {
                    "report_version": 1,
                    "parameters": {
                        **_parameters(args, ["epsilon", "seed", "feastol"]),
                        "lambda": args.lam,
                    },
                    "selected_lambda": selected,
                    "max_box_violation": box_viol,
                    "min_pair_margin": margin,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = SynthConfig(
        num_papers=args.papers,
        sigma=args.sigma,
        reviews_per_paper=args.reviews_per_paper,
        papers_per_reviewer=args.papers_per_reviewer,
        seed=args.seed,
    )
    instance = generate(config)
    paths = io.write_synthetic(instance, args.output_prefix)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_qv(args) -> int:
    dataset = _load(args)
    settings = SolverSettings(feasibility_tolerance=args.feastol)
    report = select_lambda(
        dataset, QVConfig(), DequantizerConfig(lam=1.0, epsilon=args.epsilon, solver=settings)
    )
    print("lambda      validation_error")
    for lam, err in zip(report.lambdas, report.errors):
        marker = "  <- selected" if lam == report.selected_lambda else ""
        print(f"{lam:<12.6g}{err:.6f}{marker}")
    if args.output:
        Path(args.output).write_text(
            json.dumps(
                {
                    "report_version": 1,
                    "parameters": {
                        **_parameters(args, ["epsilon", "seed", "feastol"]),
                        "lambda": args.lam,
                    },
                    "lambdas": list(report.lambdas),
                    "errors": list(report.errors),
                    "selected_lambda": report.selected_lambda,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    return EXIT_OK


def _cmd_baseline(args) -> int:
    dataset = _load(args)
    if args.method == "quantized":
        scores = baselines.quantized_baseline(dataset)
    elif args.method == "bre_adjusted":
        scores = baselines.bre_adjusted_scores(dataset, args.epsilon)
    else:
        scores = baselines.partial_rankings_adjusted_scores(dataset, args.epsilon)
    io.write_scores(scores, dataset, args.output)
    print(f"wrote {args.output} ({dataset.num_reviews} reviews)")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    values = tuple(float(v) for v in args.values.split(","))
    if args.raw_scores:
        base = FileSource(
            raw_path=args.raw_scores,
            reviews_per_paper=args.reviews_per_paper,
            papers_per_reviewer=args.papers_per_reviewer,
        )
    else:
        base = SynthConfig(
            num_papers=args.papers,
            sigma=args.sigma,
            reviews_per_paper=args.reviews_per_paper,
            papers_per_reviewer=args.papers_per_reviewer,
        )
    spec = ExperimentSpec(
        methods=tuple(args.methods.split(",")),
        sweep_parameter=args.sweep,
        sweep_values=values,
        trials=args.trials,
        base=base,
        metrics=tuple(args.metrics.split(",")),
        epsilon=args.epsilon,
        lam=args.lam,
        seed=args.seed,
        feasibility_tolerance=args.feastol,
        jobs=args.jobs,
    )
    report = run_experiment(spec)
    report.save(args.output)
    print(report.table())
    print(f"wrote {args.output}")
    if args.table:
        with open(args.table, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["method", "sweep_value", "metric", "mean", "sem"])
            for row in report.results:
                for metric, cell in sorted(row["metrics"].items()):
                    writer.writerow(
                        [
                            row["method"],
                            row["sweep_value"],
                            metric,
                            format(cell["mean"], ".12g"),
                            format(cell["sem"], ".12g"),
                        ]
                    )
        print(f"wrote {args.table}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "dequantize": _cmd_dequantize,
    "simulate": _cmd_simulate,
    "qv": _cmd_qv,
    "baseline": _cmd_baseline,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (io.ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
