#!/usr/bin/env python3
"""Run the protect/recover benchmark and write CSVs plus a text summary."""

import argparse
from datetime import date

from privlog import BenchConfig, run_bench
from privlog.bench import format_summary


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lines", type=int, default=20_000)
    parser.add_argument("--density", choices=("low", "medium", "high"), default="medium")
    parser.add_argument("--days", type=int, default=10)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--start", default="2024-05-01", help="first day (YYYY-MM-DD)")
    parser.add_argument("--out-dir", default="bench_out")
    args = parser.parse_args()

    cfg = BenchConfig(
        line_count=args.lines,
        pii_density=args.density,
        day_span=args.days,
        seed=args.seed,
        start_date=date.fromisoformat(args.start),
    )
    report = run_bench(cfg, out_dir=args.out_dir)
    print(format_summary(report), end="")
    print(f"csv outputs in {args.out_dir}/ (wall {report.wall_seconds:.1f}s)")


if __name__ == "__main__":
    main()
