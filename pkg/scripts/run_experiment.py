"""Compare the geometric and rule-augmented pathways over several seeds.

Each seed generates a full synthetic dataset, splits it, trains both pathways
without cross-validation and evaluates them on the held-out sessions. Prints
the anger F-measure and accuracy per pathway and seed, and writes the same
rows as CSV when --csv is given.

    python scripts/run_experiment.py --seeds 0-9
"""

import argparse
import csv
import sys
import time

from aggrofuse.config import RunConfig
from aggrofuse.experiment import compare_pathways
from aggrofuse.pipeline import GEOMETRIC, RULES


def parse_seeds(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        out += list(range(int(lo), int(hi or lo) + 1))
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", default="0-9", help="seed list such as 0-9 or 1,4,7")
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--csv", help="write per-seed rows to this file")
    args = p.parse_args(argv)
    cfg = RunConfig.load(args.config) if args.config else RunConfig()

    rows = []
    print(f"{'seed':>4} {'geo F':>7} {'rules F':>7} {'geo acc':>7} {'rules acc':>9} {'secs':>5}")
    for seed in parse_seeds(args.seeds):
        t0 = time.perf_counter()
        c = compare_pathways(seed, cfg)
        row = {"seed": seed,
               "geometric_anger_f": c.anger_f(GEOMETRIC), "rules_anger_f": c.anger_f(RULES),
               "geometric_accuracy": c.metrics[GEOMETRIC].accuracy,
               "rules_accuracy": c.metrics[RULES].accuracy}
        rows.append(row)
        print(f"{seed:>4} {row['geometric_anger_f']:>7.3f} {row['rules_anger_f']:>7.3f} "
              f"{row['geometric_accuracy']:>7.3f} {row['rules_accuracy']:>9.3f} "
              f"{time.perf_counter() - t0:>5.1f}", flush=True)
    wins = sum(r["rules_anger_f"] >= r["geometric_anger_f"] for r in rows)
    print(f"rules anger F >= geometric in {wins}/{len(rows)} seeds")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
