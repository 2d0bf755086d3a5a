#!/usr/bin/env python3
"""
Goal Recognition Workbench

    gen      build a benchmark dataset (JSON Lines + manifest)
    train    train the LSTM goal classifier on a dataset
    bench    run the recognizers over the test problems
    unknown  LSTM report on goals never seen in training
    oracle   independent verification suites

Exit codes: 0 success, 1 usage or configuration error, 2 oracle, dataset
format or invariant failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from evaluation.bench_runner import (
    OUTPUT_FORMATS,
    RECOGNIZERS,
    UNKNOWN_FILE,
    BenchConfig,
    BenchConfigError,
    BenchRunner,
    check_theta_nesting,
    print_bench_summary,
    print_unknown_report,
    unknown_goal_report,
    write_outputs,
)
from evaluation.oracle_suite import SUITES, print_oracle_report, run_oracles
from modeling.goal_prediction_service import GoalPredictionService
from modeling.train_lstm import (
    CheckpointError,
    LstmModel,
    TrainConfig,
    append_training_run,
    default_checkpoint_path,
    load_checkpoint,
    print_training_summary,
    save_checkpoint,
    train,
)
from tracegen.dataset_pipeline import (
    DatasetConfig,
    DatasetFormatError,
    DatasetInvariantError,
    DatasetPipeline,
    InsufficientGoalsError,
    ensure_valid,
    load_dataset,
)
from tracegen.observation_sampler import ROUNDING_RULES
from utils import settings
from utils.settings import DOMAIN_KINDS, OBSERVABILITY_LEVELS, ensure_dir, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
PLANNER_FLAGS = {"astar": "optimal_astar", "bfs": "optimal_bfs", "gbfs": "satisficing_gbfs"}


class CliParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"❌ {self.prog}: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


# === Subcommands ===

def cmd_gen(args) -> int:
    cfg = DatasetConfig(
        domain=args.domain,
        n_problems=args.problems,
        n_candidates=args.candidates,
        levels=tuple(args.levels),
        seed=args.seed,
        traces_per_goal=args.traces_per_goal,
        n_train_goals=args.train_goals,
        n_unknown_goals=args.unknown_goals,
        unknown_depth=args.unknown_depth,
        planner=PLANNER_FLAGS[args.planner],
        rounding=args.rounding,
        n_jobs=args.jobs,
    )
    pipeline = DatasetPipeline(cfg)
    results = pipeline.run(args.out)
    pipeline.print_pipeline_summary(results)
    if results['success']:
        logger.info("✅ Dataset generated successfully!")
        return EXIT_OK
    return EXIT_FAILURE if isinstance(results['error'], DatasetInvariantError) else EXIT_USAGE


def _train_config(args) -> TrainConfig:
    kwargs = dict(
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        batch_size=args.batch_size,
        seed=args.seed,
        include_initial_state=not args.no_initial_state,
    )
    if args.full_scale:
        return TrainConfig.full_scale(**kwargs)
    return TrainConfig(embed_dim=args.embed_dim, hidden_dim=args.hidden_dim, **kwargs)


def cmd_train(args) -> int:
    cfg = _train_config(args)
    dataset = load_dataset(args.dataset)
    logger.info(f"🚀 Training {dataset.domain} LSTM on {len(dataset.split('train'))} records")
    model, report = train(dataset, cfg)
    path = save_checkpoint(model, args.out or default_checkpoint_path(dataset.domain, cfg.seed))
    append_training_run(model, report, dataset)
    print_training_summary(model, report)
    print(f"\n💾 Checkpoint: {path}")
    return EXIT_OK


def _default_model(domain: str, seed: Optional[int]) -> Optional[LstmModel]:
    """lstm_<domain>_s<seed>.joblib when a seed is given, else the newest checkpoint of the domain."""
    if seed is not None:
        path = default_checkpoint_path(domain, seed)
        return load_checkpoint(path) if path.exists() else None
    service = GoalPredictionService()
    return service.model if service.load_model(domain=domain) else None


def _load_models(paths: List[str], domains: List[str], seed: Optional[int] = None) -> Dict[str, LstmModel]:
    """Checkpoints keyed by domain; domains without one fall back to the models dir."""
    models = {}
    for path in paths:
        model = load_checkpoint(path)
        models[model.domain] = model
    for domain in domains:
        if domain in models:
            continue
        model = _default_model(domain, seed)
        if model is not None:
            models[domain] = model
    return models


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        recognizers=tuple(_csv_list(args.recognizers)),
        thetas=tuple(args.theta),
        levels=tuple(args.levels),
        rg_planner=PLANNER_FLAGS[args.rg_planner],
        out_dir=Path(args.out) if args.out else settings.RESULTS_DIR,
        output_format=args.format,
        seed=args.seed,
        n_jobs=args.jobs,
    )
    datasets = [ensure_valid(load_dataset(path)) for path in args.dataset]
    models = {}
    if "lstm" in cfg.recognizers:
        models = _load_models(args.checkpoint or [], [d.domain for d in datasets], cfg.seed)
    runner = BenchRunner(cfg, datasets, models)
    result = runner.run()
    paths = write_outputs(result, cfg.out_dir)
    print_bench_summary(result, cfg.output_format)
    logger.info(f"💾 Bench files: {', '.join(p.name for p in paths)}")

    violations = check_theta_nesting(result.summary(), cfg.thetas)
    for violation in violations:
        logger.error(f"❌ Theta nesting violated: {violation}")
    if violations or result.failures:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_unknown(args) -> int:
    dataset = load_dataset(args.dataset)
    model = load_checkpoint(args.checkpoint) if args.checkpoint else _default_model(dataset.domain, args.seed)
    if model is None:
        raise FileNotFoundError(f"no {dataset.domain} checkpoint in {settings.MODELS_DIR}"
                                + (f" for seed {args.seed}" if args.seed is not None else ""))
    report = unknown_goal_report(dataset, model)
    out_dir = ensure_dir(Path(args.out) if args.out else settings.RESULTS_DIR)
    path = out_dir / UNKNOWN_FILE
    report.to_csv(path, index=False, lineterminator="\n")
    print_unknown_report(report)
    logger.info(f"💾 Saved {path}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    results = run_oracles([args.suite], seed=args.seed)
    print_oracle_report(results)
    if results['success']:
        logger.info("✅ All oracle checks passed")
        return EXIT_OK
    logger.error(f"❌ {len(results['failures'])} oracle check(s) failed")
    return EXIT_FAILURE


# === Parser ===

def build_parser() -> CliParser:
    parser = CliParser(description="Goal recognition workbench: datasets, recognizers, benchmarks")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="No progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Build a benchmark dataset")
    gen.add_argument("--domain", choices=DOMAIN_KINDS, required=True)
    gen.add_argument("--problems", type=int, default=6, help="Test problems (default: 6)")
    gen.add_argument("--candidates", type=int, help="Candidate goals per problem (default: 4 hanoi34, 6 others)")
    gen.add_argument("--levels", type=int, nargs="+", default=list(OBSERVABILITY_LEVELS))
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--traces-per-goal", type=int, help="Training traces per goal (default: 25 hanoi34, 3 others)")
    gen.add_argument("--train-goals", type=int, help="Size of the known goal pool")
    gen.add_argument("--unknown-goals", type=int, help="Held-out goals (default: 0 hanoi34, 6 others)")
    gen.add_argument("--unknown-depth", type=int, nargs=2, metavar=("LOW", "HIGH"),
                     help="Draw held-out goals LOW..HIGH moves from the anchor (default: 14 16 eight_puzzle)")
    gen.add_argument("--planner", choices=PLANNER_FLAGS, default="astar")
    gen.add_argument("--rounding", choices=ROUNDING_RULES, default="round")
    gen.add_argument("--out", help=f"Output directory (default: {settings.DATASETS_DIR})")
    gen.add_argument("--jobs", type=int, default=settings.N_JOBS)
    gen.set_defaults(handler=cmd_gen)

    tr = sub.add_parser("train", help="Train the LSTM goal classifier")
    tr.add_argument("--dataset", required=True, help="Dataset .jsonl file or its directory")
    tr.add_argument("--epochs", type=int, default=10_000)
    tr.add_argument("--patience", type=int, default=50)
    tr.add_argument("--batch-size", type=int, default=32)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--embed-dim", type=int, default=64)
    tr.add_argument("--hidden-dim", type=int, default=128)
    tr.add_argument("--paper-scale", "--full-scale", dest="full_scale", action="store_true",
                    help="Embedding 1000, hidden 512")
    tr.add_argument("--no-initial-state", action="store_true", help="Do not prepend the initial state")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", help="Checkpoint path (default: models/lstm_<domain>_s<seed>.joblib)")
    tr.set_defaults(handler=cmd_train)

    bench = sub.add_parser("bench", help="Benchmark the recognizers")
    bench.add_argument("--dataset", action="append", required=True, help="Dataset path, repeat per domain")
    bench.add_argument("--checkpoint", action="append", help="LSTM checkpoint, repeat per domain")
    bench.add_argument("--recognizers", default=",".join(RECOGNIZERS),
                       help=f"Comma separated subset of {','.join(RECOGNIZERS)}")
    bench.add_argument("--theta", type=float, nargs="+", default=[0, 10])
    bench.add_argument("--levels", type=int, nargs="+", default=list(OBSERVABILITY_LEVELS))
    bench.add_argument("--rg-planner", choices=PLANNER_FLAGS, default="astar")
    bench.add_argument("--out", help=f"Results directory (default: {settings.RESULTS_DIR})")
    bench.add_argument("--format", choices=OUTPUT_FORMATS, default="table")
    bench.add_argument("--seed", type=int, help="Use lstm_<domain>_s<seed>.joblib (default: newest checkpoint)")
    bench.add_argument("--jobs", type=int, default=settings.N_JOBS)
    bench.set_defaults(handler=cmd_bench)

    unknown = sub.add_parser("unknown", help="LSTM on unknown goals")
    unknown.add_argument("--dataset", required=True)
    unknown.add_argument("--checkpoint", help="Default: newest checkpoint of the dataset's domain")
    unknown.add_argument("--seed", type=int, help="Use lstm_<domain>_s<seed>.joblib (default: newest checkpoint)")
    unknown.add_argument("--out")
    unknown.set_defaults(handler=cmd_unknown)

    oracle = sub.add_parser("oracle", help="Run the verification suites")
    oracle.add_argument("--suite", choices=SUITES + ("all",), default="all")
    oracle.add_argument("--seed", type=int, default=0, help="Seed of the random instances")
    oracle.set_defaults(handler=cmd_oracle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.verbose else None)
    if args.quiet:
        settings.SHOW_PROGRESS = False

    try:
        return args.handler(args)
    except (DatasetFormatError, DatasetInvariantError) as e:
        logger.error(f"❌ {e}")
        return EXIT_FAILURE
    except (BenchConfigError, CheckpointError, InsufficientGoalsError, FileNotFoundError, ValueError) as e:
        logger.error(f"❌ {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
