"""Command-line interface: ``relayrl {train,evaluate,sweep}``.

Every subcommand takes ``--config`` (YAML run config), ``--seed`` (int or
comma-separated ints, overriding the config's seed list), and ``--out``
(output directory, overriding the config's ``out_dir``). ``evaluate``
additionally takes ``--checkpoint`` (path to a frozen policy; optional for
the random agent) and ``--lambda`` (comma-separated outage thresholds).
``sweep`` optionally takes ``--dimension`` and ``--values`` to override the
config's sweep section.
"""

from __future__ import annotations

import argparse
import sys

from .harness import evaluate, load_config, sweep, train

__all__ = ["main", "build_parser"]


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayrl",
        description="Train and evaluate relay-selection/power-allocation agents "
                    "on a two-hop cooperative relay channel.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="path to YAML run config")
        p.add_argument("--seed", type=_parse_int_list, default=None,
                       help="seed or comma-separated seeds (overrides config)")
        p.add_argument("--out", default=None,
                       help="output directory (overrides config out_dir)")

    p_train = sub.add_parser("train", help="train an agent; write metrics, "
                                           "checkpoints, and a success-curve figure")
    add_common(p_train)

    p_eval = sub.add_parser("evaluate", help="greedy rollout of a frozen policy; "
                                             "write outage-vs-threshold report")
    add_common(p_eval)
    p_eval.add_argument("--checkpoint", default=None,
                        help="policy checkpoint (optional for the random agent)")
    p_eval.add_argument("--lambda", dest="lambda_grid", type=_parse_float_list,
                        default=None,
                        help="comma-separated outage thresholds (overrides config)")

    p_sweep = sub.add_parser("sweep", help="re-train across values of one "
                                           "hyperparameter; write summary and figure")
    add_common(p_sweep)
    p_sweep.add_argument("--dimension", default=None,
                         help="hyperparameter to sweep (overrides config)")
    p_sweep.add_argument("--values", type=_parse_float_list, default=None,
                         help="comma-separated values to sweep (overrides config)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    run_config = load_config(args.config)
    if args.seed is not None:
        run_config.seeds = args.seed

    if args.command == "train":
        summary = train(run_config, out_dir=args.out)
        for seed, info in summary["seeds"].items():
            print(f"seed {seed}: final success_ma={info['final_ma']:.4f} "
                  f"metrics={info['metrics_path']} checkpoint={info['checkpoint_path']}")
        print(f"figure: {summary['figure_path']}")
        return 0

    if args.command == "evaluate":
        seed = run_config.seeds[0]
        out = args.out if args.out is not None else run_config.out_dir
        report = evaluate(
            run_config, args.checkpoint, lambda_grid=args.lambda_grid,
            seed=seed, out_dir=out,
        )
        for lam, po in zip(report.lambdas, report.outages):
            print(f"lambda={lam:g}: outage={po:.4f}")
        return 0

    if args.command == "sweep":
        results = sweep(run_config, dimension=args.dimension,
                        values=args.values, out_dir=args.out)
        for value, stats in results["values"].items():
            print(f"{results['dimension']}={value}: "
                  f"final_ma mean={stats['final_mean']:.4f} "
                  f"range=[{stats['final_min']:.4f}, {stats['final_max']:.4f}]")
        print(f"summary: {results['summary_path']}")
        return 0

    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
