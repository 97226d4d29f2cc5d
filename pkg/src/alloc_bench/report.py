"""Rendering of backtest and protocol results to tables, JSON, and CSV.

Files always carry plain fractions; percentages appear only in the
human-readable table. Every emitter is deterministic: the same inputs
produce byte-identical output (no timestamps, no dict-order surprises).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .backtest import BacktestResult, ProtocolSummary
from .metrics import MetricsReport, full_report

__all__ = [
    "STRATEGY_LABELS",
    "RunManifest",
    "metrics_to_dict",
    "render_table",
    "protocol_table",
    "protocol_report_dict",
    "write_json_report",
    "write_curve_csv",
    "write_weights_csv",
]

STRATEGY_LABELS = {
    "tangency": "Tangency",
    "minvariance": "Min variance",
    "riskparity": "Risk parity",
    "equalweight": "Equal weight",
    "a2c": "A2C",
    "ppo": "PPO",
    "ddpg": "DDPG",
    "td3": "TD3",
    "sac": "SAC",
}

_COLUMNS = (
    ("Annual ret", "annual_return", "pct"),
    ("Cum ret", "cumulative_return", "pct"),
    ("Annual vol", "annual_volatility", "pct"),
    ("Sharpe", "sharpe", "num"),
    ("Calmar", "calmar", "num"),
    ("Stability", "stability", "num"),
    ("Max DD", "max_drawdown", "pct"),
)


@dataclass(frozen=True)
class RunManifest:
    """Invocation record embedded in every report.json."""

    mode: str
    data: str
    strategies: tuple
    window: int
    drl_window: int
    cost_rate: float
    train_fraction: float | None
    n_runs: int
    base_seed: int
    allow_short: bool
    risk_free_rate: float
    total_steps: int
    out_dir: str | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategies"] = list(self.strategies)
        return d


def metrics_to_dict(report: MetricsReport) -> dict:
    """Fixed-order plain dict; undefined ratios stay None (JSON null)."""
    return {
        "annual_return": report.annual_return,
        "cumulative_return": report.cumulative_return,
        "annual_volatility": report.annual_volatility,
        "sharpe": report.sharpe,
        "calmar": report.calmar,
        "stability": report.stability,
        "max_drawdown": report.max_drawdown,
    }


def _cell(value: float | None, kind: str) -> str:
    if value is None:
        return "n/a"
    if kind == "pct":
        return f"{100.0 * value:.2f}%"
    return f"{value:.3f}"


def render_table(rows: list) -> str:
    """Fixed-width text table from (label, MetricsReport | None) rows.

    A None report renders the label as a section separator line.
    """
    header = ["Strategy"] + [name for name, _, _ in _COLUMNS]
    body: list[list[str]] = []
    for label, report in rows:
        if report is None:
            body.append([label])
            continue
        cells = [label]
        for _, attr, kind in _COLUMNS:
            cells.append(_cell(getattr(report, attr), kind))
        body.append(cells)
    widths = [len(h) for h in header]
    for cells in body:
        if len(cells) == 1:
            continue
        for i, cell in enumerate(cells):
            widths[i] = max(widths[i], len(cell))
    lines = []
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    total = sum(widths) + 2 * (len(widths) - 1)
    for cells in body:
        if len(cells) == 1:
            lines.append(f"-- {cells[0]} ".ljust(total, "-"))
        else:
            lines.append(
                "  ".join(
                    cell.ljust(w) if i == 0 else cell.rjust(w)
                    for i, (cell, w) in enumerate(zip(cells, widths))
                )
            )
    return "\n".join(lines) + "\n"


def _result_report(result: BacktestResult) -> MetricsReport:
    return full_report(result.daily_returns)


def protocol_table(summary: ProtocolSummary, classical_order, drl_order) -> str:
    """Comparison table: classical rows, then best-run and worst-run blocks."""
    rows: list = []
    for name in classical_order:
        rows.append((STRATEGY_LABELS[name], _result_report(summary.classical[name])))
    if drl_order:
        rows.append((f"best of {summary.n_runs} runs", None))
        for name in drl_order:
            runs = summary.algorithms[name]
            best = runs.best
            label = STRATEGY_LABELS[name]
            if best is None:
                rows.append((f"{label} (all runs failed)", None))
            else:
                rows.append((f"{label} (seed {best.seed})", _result_report(best.result)))
        rows.append((f"worst of {summary.n_runs} runs", None))
        for name in drl_order:
            runs = summary.algorithms[name]
            worst = runs.worst
            label = STRATEGY_LABELS[name]
            if worst is None:
                rows.append((f"{label} (all runs failed)", None))
            else:
                rows.append((f"{label} (seed {worst.seed})", _result_report(worst.result)))
    return render_table(rows)


def _csv_fraction(x: float) -> str:
    return f"{x:.10g}"


def write_curve_csv(path, result: BacktestResult) -> None:
    """date,cumulative_return rows; the first row is the start date at 0."""
    cumulative = result.equity / result.equity[0] - 1.0
    lines = ["date,cumulative_return"]
    for date, value in zip(result.dates, cumulative):
        lines.append(f"{date.isoformat()},{_csv_fraction(float(value))}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_weights_csv(path, result: BacktestResult, tickers) -> None:
    """One row of chosen weights per decision day."""
    lines = ["date," + ",".join(tickers)]
    for date, row in zip(result.dates[:-1], result.weights_history):
        cells = ",".join(_csv_fraction(float(w)) for w in row)
        lines.append(f"{date.isoformat()},{cells}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _strategy_entry_classical(name: str, result: BacktestResult) -> dict:
    return {
        "id": name,
        "kind": "classical",
        "seed": None,
        "metrics": metrics_to_dict(_result_report(result)),
        "cumulative_return": result.cumulative_return,
        "files": {
            "curve": f"curve_{name}.csv",
            "weights": f"weights_{name}.csv",
        },
    }


def _strategy_entry_drl(name: str, runs) -> dict:
    entry: dict = {"id": name, "kind": "drl", "runs": [], "failures": []}
    for record in runs.runs:
        entry["runs"].append(
            {
                "seed": record.seed,
                "cumulative_return": record.cumulative_return,
                "metrics": metrics_to_dict(_result_report(record.result)),
                "files": {
                    "curve": f"curve_{name}_seed{record.seed}.csv",
                    "weights": f"weights_{name}_seed{record.seed}.csv",
                },
            }
        )
    for seed, message in runs.failures:
        entry["failures"].append({"seed": seed, "error": message})
    entry["protocol_stats"] = {
        "n_runs": len(runs.runs) + len(runs.failures),
        "n_failed": runs.n_failed,
        "mean_cumulative_return": runs.mean_cumulative,
        "stdev_cumulative_return": runs.stdev_cumulative,
        "best_seed": runs.best.seed if runs.best else None,
        "worst_seed": runs.worst.seed if runs.worst else None,
    }
    return entry


def protocol_report_dict(
    summary: ProtocolSummary, manifest: RunManifest, classical_order, drl_order
) -> dict:
    strategies = [
        _strategy_entry_classical(name, summary.classical[name]) for name in classical_order
    ]
    strategies += [_strategy_entry_drl(name, summary.algorithms[name]) for name in drl_order]
    return {"manifest": manifest.to_dict(), "strategies": strategies}


def write_json_report(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, allow_nan=False)
        fh.write("\n")
