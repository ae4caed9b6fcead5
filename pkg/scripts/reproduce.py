#!/usr/bin/env python3
"""Run the bundled experiment configs and print the collected summaries.

Each experiment is executed through the same entry point as ``rffnet run``
and writes its traces under ``<out>/<name>/``; afterwards every summary row
is printed as one line. The adult configs are skipped unless the required
``datasets/adult.libsvm`` file is present (see scripts/make_datasets.py),
and the heavier stream experiments can be skipped with ``--fast``.
"""

import argparse
import csv
import sys
import time
from pathlib import Path

from rffnet.cli import list_experiments, load_config, main as cli_main

# Stream experiments with large feature counts; minutes rather than seconds.
SLOW = {"example1", "example2", "example5", "example6"}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs", help="output root (default: runs)")
    parser.add_argument("--fast", action="store_true",
                        help=f"skip the slow stream experiments ({', '.join(sorted(SLOW))})")
    parser.add_argument("--only", nargs="*", metavar="NAME",
                        help="run just these bundled experiments")
    args = parser.parse_args()

    names = args.only if args.only else list_experiments()
    rows: list[dict[str, str]] = []
    for name in names:
        cfg = load_config(name)
        if args.fast and name in SLOW:
            print(f"-- {name}: skipped (--fast)")
            continue
        if cfg.source == "libsvm" and not Path(cfg.data_path).is_file():
            print(f"-- {name}: skipped ({cfg.data_path} not found)")
            continue
        out_dir = Path(args.out) / name
        t0 = time.time()
        code = cli_main(["run", name, "--out", str(out_dir)])
        if code != 0:
            print(f"-- {name}: FAILED with exit code {code}", file=sys.stderr)
            return code
        with (out_dir / "summary.csv").open() as fh:
            rows.extend(csv.DictReader(fh))
        print(f"-- {name}: done in {time.time() - t0:.1f}s")

    if rows:
        print()
        width = max(len(r["experiment"]) for r in rows)
        for r in rows:
            print(f"{r['experiment']:<{width}}  {r['learner']:<8} K={r['K']:<3} "
                  f"D={r['D']:<5} {r['metric_name']:<13} "
                  f"mean={float(r['mean']):.4f} std={float(r['std']):.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
