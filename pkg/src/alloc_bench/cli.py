"""Command-line entry point.

Modes:
  synth     generate a synthetic correlated random-walk price CSV
  backtest  walk classical strategies over a price CSV, no costs
  train     train one agent on the train split, evaluate on the test split
  protocol  full comparison: classical plus seeded agent runs per algorithm

Exit codes: 0 success, 2 usage error, 3 bad or insufficient data,
4 training diverged, 5 filesystem error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .agents import ALGORITHMS, AgentConfig, train
from .backtest import (
    CLASSICAL_STRATEGIES,
    run_agent,
    run_classical,
    run_protocol,
)
from .classical import SolverConfig
from .environment import EnvConfig
from .errors import (
    AllocBenchError,
    InsufficientDataError,
    ParseError,
    TrainingDivergedError,
    UsageError,
    ValidationError,
)
from .market_data import SplitSpec, load_csv, split, synth_market, write_csv
from .metrics import full_report
from .report import (
    STRATEGY_LABELS,
    RunManifest,
    metrics_to_dict,
    protocol_report_dict,
    protocol_table,
    render_table,
    write_curve_csv,
    write_json_report,
    write_weights_csv,
)

__all__ = ["build_parser", "main"]

ALL_STRATEGIES = CLASSICAL_STRATEGIES + ALGORITHMS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_IO = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alloc-bench",
        description="Portfolio allocation benchmark: classical optimizers vs policy-gradient agents.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic price CSV")
    p_synth.add_argument("--out", required=True, help="output CSV path")
    p_synth.add_argument("--days", type=int, default=1260, help="number of rows (default 1260)")
    p_synth.add_argument("--assets", type=int, default=8, help="number of assets (default 8)")
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument(
        "--drift", type=float, default=4e-4,
        help="center of the per-asset daily drift spread (default 4e-4)",
    )
    p_synth.add_argument(
        "--vol", type=float, default=0.012,
        help="center of the per-asset daily volatility spread (default 0.012)",
    )
    p_synth.add_argument(
        "--rho", type=float, default=0.3, help="pairwise correlation (default 0.3)"
    )

    p_back = sub.add_parser("backtest", help="daily re-estimated classical strategies")
    p_back.add_argument("--data", required=True, help="price CSV")
    p_back.add_argument(
        "--strategy", action="append", default=None,
        help=f"repeatable; classical ids {CLASSICAL_STRATEGIES} (default: all)",
    )
    p_back.add_argument("--window", type=int, default=50, help="estimation window (default 50)")
    p_back.add_argument("--allow-short", action="store_true", help="drop the long-only constraint")
    p_back.add_argument("--rf", type=float, default=0.0, help="daily risk-free rate for tangency")
    p_back.add_argument("--out", default=None, help="directory for report.json and CSVs")

    p_train = sub.add_parser("train", help="train one agent and evaluate on the test split")
    p_train.add_argument("--data", required=True, help="price CSV")
    p_train.add_argument("--strategy", action="append", default=None,
                         help=f"exactly one of {ALGORITHMS}")
    p_train.add_argument("--steps", type=int, default=None,
                         help="environment steps (default 200000)")
    p_train.add_argument("--seed", type=int, default=42)
    p_train.add_argument("--cost", type=float, default=0.001,
                         help="proportional transaction cost (default 0.001)")
    p_train.add_argument("--train-split", type=float, default=0.8,
                         help="train fraction of rows (default 0.8)")
    p_train.add_argument("--out", default=None,
                         help="directory for checkpoints, training log, and report")

    p_proto = sub.add_parser("protocol", help="classical vs seeded agent comparison")
    p_proto.add_argument("--data", required=True, help="price CSV")
    p_proto.add_argument(
        "--strategy", action="append", default=None,
        help=f"repeatable; any of {ALL_STRATEGIES} (default: all)",
    )
    p_proto.add_argument("--window", type=int, default=50,
                         help="classical estimation window (default 50)")
    p_proto.add_argument("--cost", type=float, default=0.001,
                         help="agent transaction cost (default 0.001)")
    p_proto.add_argument("--train-split", type=float, default=0.8)
    p_proto.add_argument("--runs", type=int, default=10, help="seeds per algorithm (default 10)")
    p_proto.add_argument("--seed", type=int, default=42, help="base seed")
    p_proto.add_argument("--allow-short", action="store_true")
    p_proto.add_argument("--rf", type=float, default=0.0)
    p_proto.add_argument("--steps", type=int, default=None,
                         help="training steps per run (default 200000)")
    p_proto.add_argument("--out", required=True, help="output directory")
    return parser


def _canonical_strategies(requested, allowed, default):
    if requested is None:
        return tuple(default)
    for name in requested:
        if name not in ALL_STRATEGIES:
            raise UsageError(
                f"unknown strategy {name!r}; valid ids: {', '.join(ALL_STRATEGIES)}"
            )
        if name not in allowed:
            raise UsageError(
                f"strategy {name!r} is not available in this mode; valid here: "
                f"{', '.join(allowed)}"
            )
    seen = dict.fromkeys(requested)
    return tuple(name for name in allowed if name in seen)


def _check_window(window: int) -> None:
    if window < 2:
        raise UsageError("--window must be >= 2")


def _check_fraction(value: float, flag: str) -> None:
    if not 0.0 < value < 1.0:
        raise UsageError(f"{flag} must be strictly between 0 and 1")


def _check_cost(cost: float) -> None:
    if not 0.0 <= cost <= 0.1:
        raise UsageError("--cost must be in [0, 0.1]")


def _load_frame(path):
    if not os.path.exists(path):
        raise InsufficientDataError(f"no such data file: {path}")
    return load_csv(path)


def _run_synth(args) -> int:
    if args.assets < 1:
        raise UsageError("--assets must be >= 1")
    if args.days < 2:
        raise UsageError("--days must be >= 2")
    n = args.assets
    spread = np.linspace(0.25, 1.75, n) if n > 1 else np.ones(1)
    vol_spread = np.linspace(0.5, 1.5, n) if n > 1 else np.ones(1)
    corr = np.full((n, n), float(args.rho))
    np.fill_diagonal(corr, 1.0)
    frame = synth_market(
        n_assets=n,
        days=args.days,
        drift=args.drift * spread,
        vol=args.vol * vol_spread,
        correlation=corr,
        seed=args.seed,
    )
    write_csv(frame, args.out)
    print(f"wrote {frame.n_days} days x {frame.n_assets} assets to {args.out}")
    return EXIT_OK


def _run_backtest(args) -> int:
    _check_window(args.window)
    strategies = _canonical_strategies(args.strategy, CLASSICAL_STRATEGIES, CLASSICAL_STRATEGIES)
    frame = _load_frame(args.data)
    solver_cfg = SolverConfig(long_only=not args.allow_short, risk_free_rate=args.rf)
    results = {
        name: run_classical(frame, name, window=args.window, solver_cfg=solver_cfg)
        for name in strategies
    }
    rows = [(STRATEGY_LABELS[name], full_report(results[name].daily_returns))
            for name in strategies]
    table = render_table(rows)
    print(table, end="")
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        manifest = RunManifest(
            mode="backtest", data=args.data, strategies=strategies,
            window=args.window, drl_window=1, cost_rate=0.0, train_fraction=None,
            n_runs=0, base_seed=0, allow_short=args.allow_short,
            risk_free_rate=args.rf, total_steps=0, out_dir=args.out,
        )
        entries = []
        for name in strategies:
            result = results[name]
            entries.append({
                "id": name,
                "kind": "classical",
                "metrics": metrics_to_dict(full_report(result.daily_returns)),
                "cumulative_return": result.cumulative_return,
                "files": {"curve": f"curve_{name}.csv", "weights": f"weights_{name}.csv"},
            })
            write_curve_csv(os.path.join(args.out, f"curve_{name}.csv"), result)
            write_weights_csv(
                os.path.join(args.out, f"weights_{name}.csv"), result, frame.tickers
            )
        write_json_report(
            os.path.join(args.out, "report.json"),
            {"manifest": manifest.to_dict(), "strategies": entries},
        )
        with open(os.path.join(args.out, "table.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
    return EXIT_OK


def _run_train(args) -> int:
    if not args.strategy or len(args.strategy) != 1:
        raise UsageError(f"train mode needs exactly one --strategy from {ALGORITHMS}")
    algorithm = args.strategy[0]
    if algorithm not in ALGORITHMS:
        raise UsageError(
            f"unknown or non-trainable strategy {algorithm!r}; valid: {', '.join(ALGORITHMS)}"
        )
    _check_fraction(args.train_split, "--train-split")
    _check_cost(args.cost)
    frame = _load_frame(args.data)
    train_frame, test_frame = split(frame, SplitSpec(train_fraction=args.train_split))
    cfg = AgentConfig(algorithm=algorithm, seed=args.seed)
    if args.steps is not None:
        if args.steps < 0:
            raise UsageError("--steps must be >= 0")
        cfg = replace(cfg, total_steps=args.steps)
    env_cfg = EnvConfig(cost_rate=args.cost, window=1)
    agent = train(cfg, train_frame, env_cfg)
    result = run_agent(agent, test_frame, env_cfg)
    report = full_report(result.daily_returns)
    print(render_table([(STRATEGY_LABELS[algorithm], report)]), end="")
    print(
        f"trained {algorithm} seed {cfg.seed} for {cfg.total_steps} steps; "
        f"test cumulative return {result.cumulative_return:.6f}"
    )
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        agent.save(os.path.join(args.out, "checkpoints"))
        log_path = os.path.join(args.out, "training_log.csv")
        with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("episode,reward\n")
            for episode, reward in agent.training_log:
                fh.write(f"{episode},{reward:.10g}\n")
        write_curve_csv(os.path.join(args.out, f"curve_{algorithm}.csv"), result)
        write_weights_csv(
            os.path.join(args.out, f"weights_{algorithm}.csv"), result, frame.tickers
        )
        manifest = RunManifest(
            mode="train", data=args.data, strategies=(algorithm,),
            window=50, drl_window=env_cfg.window, cost_rate=args.cost,
            train_fraction=args.train_split, n_runs=1, base_seed=args.seed,
            allow_short=False, risk_free_rate=0.0, total_steps=cfg.total_steps,
            out_dir=args.out,
        )
        write_json_report(
            os.path.join(args.out, "report.json"),
            {
                "manifest": manifest.to_dict(),
                "strategies": [{
                    "id": algorithm,
                    "kind": "drl",
                    "seed": cfg.seed,
                    "metrics": metrics_to_dict(report),
                    "cumulative_return": result.cumulative_return,
                    "files": {
                        "curve": f"curve_{algorithm}.csv",
                        "weights": f"weights_{algorithm}.csv",
                    },
                }],
            },
        )
    return EXIT_OK


def _run_protocol(args) -> int:
    _check_window(args.window)
    _check_fraction(args.train_split, "--train-split")
    _check_cost(args.cost)
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    strategies = _canonical_strategies(args.strategy, ALL_STRATEGIES, ALL_STRATEGIES)
    classical_order = tuple(s for s in strategies if s in CLASSICAL_STRATEGIES)
    drl_order = tuple(s for s in strategies if s in ALGORITHMS)
    frame = _load_frame(args.data)
    solver_cfg = SolverConfig(long_only=not args.allow_short, risk_free_rate=args.rf)
    env_cfg = EnvConfig(cost_rate=args.cost, window=1)
    steps = args.steps
    if steps is not None and steps < 0:
        raise UsageError("--steps must be >= 0")
    agent_cfgs = []
    for name in drl_order:
        cfg = AgentConfig(algorithm=name, seed=args.seed)
        if steps is not None:
            cfg = replace(cfg, total_steps=steps)
        agent_cfgs.append(cfg)
    summary = run_protocol(
        frame,
        SplitSpec(train_fraction=args.train_split),
        agent_cfgs,
        n_runs=args.runs,
        env_cfg=env_cfg,
        solver_cfg=solver_cfg,
        classical_window=args.window,
        classical_strategies=classical_order,
    )
    table = protocol_table(summary, classical_order, drl_order)
    print(table, end="")

    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(
        mode="protocol", data=args.data, strategies=strategies,
        window=args.window, drl_window=1, cost_rate=args.cost,
        train_fraction=args.train_split, n_runs=args.runs, base_seed=args.seed,
        allow_short=args.allow_short, risk_free_rate=args.rf,
        total_steps=steps if steps is not None else AgentConfig(algorithm="a2c").total_steps,
        out_dir=args.out,
    )
    payload = protocol_report_dict(summary, manifest, classical_order, drl_order)
    write_json_report(os.path.join(args.out, "report.json"), payload)
    with open(os.path.join(args.out, "table.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    for name in classical_order:
        result = summary.classical[name]
        write_curve_csv(os.path.join(args.out, f"curve_{name}.csv"), result)
        write_weights_csv(os.path.join(args.out, f"weights_{name}.csv"), result, frame.tickers)
    for name in drl_order:
        for record in summary.algorithms[name].runs:
            tag = f"{name}_seed{record.seed}"
            write_curve_csv(os.path.join(args.out, f"curve_{tag}.csv"), record.result)
            write_weights_csv(
                os.path.join(args.out, f"weights_{tag}.csv"), record.result, frame.tickers
            )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if args.mode == "synth":
            return _run_synth(args)
        if args.mode == "backtest":
            return _run_backtest(args)
        if args.mode == "train":
            return _run_train(args)
        if args.mode == "protocol":
            return _run_protocol(args)
        raise UsageError(f"unknown mode {args.mode!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ParseError, ValidationError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AllocBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
