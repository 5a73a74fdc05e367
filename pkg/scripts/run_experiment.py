#!/usr/bin/env python3
"""End-to-end experiment: generate days, train both policies, compare.

Writes everything under --workdir (default: a fresh ./experiment directory)
and prints the held-out comparison table at the end.
"""

import argparse
import sys
from pathlib import Path

from evcs.cli import main as evcs


def sh(args: list[str]) -> None:
    print("+ evcs", " ".join(args))
    code = evcs(args)
    if code != 0:
        sys.exit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="experiment")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iterations", type=int, default=250)
    args = parser.parse_args()

    work = Path(args.workdir)
    train_dir, test_dir = work / "train_days", work / "test_days"
    models, results = work / "models", work / "results"

    sh(["generate", "--out", str(train_dir), "--seed", str(args.seed)])
    sh(["generate", "--out", str(test_dir), "--seed", str(args.seed + 1)])

    sh([
        "train", "--data", str(train_dir), "--algo", "pg",
        "--iterations", str(args.iterations), "--seed", str(args.seed),
        "--out", str(models / "pg.json"),
    ])
    sh([
        "train", "--data", str(train_dir), "--algo", "qe",
        "--iterations", str(args.iterations * 4), "--alpha", "0.02",
        "--seed", str(args.seed), "--out", str(models / "qe.json"),
    ])

    print("\nheld-out comparison (policy gradient vs approximate-Q):")
    sh([
        "compare", str(models / "pg.json"), str(models / "qe.json"),
        "--data", str(test_dir), "--out", str(results),
    ])
    print(f"\ntables and action traces under {results}/")


if __name__ == "__main__":
    main()
