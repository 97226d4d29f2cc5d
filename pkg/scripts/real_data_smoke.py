"""Optional qualitative check against user-supplied real price data.

Not part of the test gate: real adjusted closes drift as vendors restate
dividends and splits, so exact numbers are not reproducible. On a broad
bull-run sample of large-cap tickers, the classical strategies have
historically ordered as

    tangency > risk parity > equal weight > min variance

on cumulative return. This script runs the four strategies on a CSV you
provide (date column plus one adjusted-close column per ticker) and reports
whether that ordering holds. Treat a miss as information about the sample,
not as a build failure.

    python3 scripts/real_data_smoke.py --data closes.csv [--window 50]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from alloc_bench.backtest import run_classical
from alloc_bench.market_data import load_csv

ORDERING = ("tangency", "riskparity", "equalweight", "minvariance")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data", required=True, help="adjusted-close CSV")
    parser.add_argument("--window", type=int, default=50)
    args = parser.parse_args()

    if not os.path.exists(args.data):
        print(f"error: no such file: {args.data}", file=sys.stderr)
        return 2
    frame = load_csv(args.data)
    returns = {}
    for strategy in ORDERING:
        result = run_classical(frame, strategy, window=args.window)
        returns[strategy] = result.cumulative_return
        print(f"{strategy:12s} cumulative return {result.cumulative_return:+.4f}")

    values = [returns[s] for s in ORDERING]
    ok = all(a > b for a, b in zip(values, values[1:]))
    print("qualitative ordering holds" if ok else "qualitative ordering differs")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
