"""Generate a synthetic bull market and run the full comparison protocol.

This is the one-command reproduction of the benchmark on data that ships
with nothing external. Expect several hours at the default 200k training
steps; pass --steps for a quick structural run.

    python3 scripts/run_synthetic_benchmark.py --out runs/bull [--steps 20000]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from alloc_bench.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--days", type=int, default=1260)
    parser.add_argument("--assets", type=int, default=8)
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--steps", type=int, default=None,
                        help="training steps per run (default 200000)")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    data = os.path.join(args.out, "prices.csv")
    rc = cli_main([
        "synth", "--out", data, "--days", str(args.days),
        "--assets", str(args.assets), "--seed", str(args.seed),
        "--drift", "6e-4",
    ])
    if rc != 0:
        return rc

    proto_args = [
        "protocol", "--data", data, "--out", os.path.join(args.out, "protocol"),
        "--runs", str(args.runs), "--seed", str(args.seed),
    ]
    if args.steps is not None:
        proto_args += ["--steps", str(args.steps)]
    rc = cli_main(proto_args)
    if rc == 0:
        print(f"\nreport: {os.path.join(args.out, 'protocol', 'report.json')}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
