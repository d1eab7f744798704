#!/usr/bin/env python3
"""Benchmark the evolutionary optimizer against COBYLA across graph sizes.

Runs both arms on a fixed set of random 3-regular graphs, under both the
CVaR and the modal-bitstring fitness, and writes one CSV row per
(size, arm, fitness mode) with mean/std/min/max approximation ratio.
"""
import argparse
import csv
import sys
import time
from pathlib import Path

from eqaoa.baseline import BaselineConfig, compare_arms
from eqaoa.evo import EvoConfig
from eqaoa.fitness import FitnessConfig
from eqaoa.graph import generate_regular
from eqaoa.rng import derive_seed


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 10, 12, 14, 16, 20])
    ap.add_argument("--graphs-per-size", type=int, default=3)
    ap.add_argument("--repetitions", type=int, default=10)
    ap.add_argument("--shots", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--modes", nargs="+", default=["cvar", "max_count"])
    ap.add_argument("--budget", choices=["literal", "matched"], default="literal")
    ap.add_argument("--out", default="accuracy_vs_size.csv")
    return ap.parse_args()


def main():
    args = parse_args()
    rows = []
    t0 = time.perf_counter()
    for mode in args.modes:
        fitness = FitnessConfig(mode=mode, alpha=0.15, shots=args.shots)
        for n in args.sizes:
            cells = {"ea": [], "baseline": []}
            for gi in range(args.graphs_per_size):
                g = generate_regular(n, 3, derive_seed(args.seed, n, gi))
                record = compare_arms(
                    g,
                    EvoConfig(n_pop=10, g=10, p=2, fitness=fitness,
                              seed=derive_seed(args.seed, 1, n, gi)),
                    BaselineConfig(iterations=10, p=2, fitness=fitness,
                                   seed=derive_seed(args.seed, 2, n, gi)),
                    repetitions=args.repetitions,
                    budget_mode=args.budget,
                )
                cells["ea"].append(record.ea)
                cells["baseline"].append(record.baseline)
            for arm, summaries in cells.items():
                ratios = [r for s in summaries for r in s.ratios]
                mean = sum(ratios) / len(ratios)
                std = (sum((r - mean) ** 2 for r in ratios) / len(ratios)) ** 0.5
                rows.append([n, arm, mode, len(ratios), f"{mean:.6f}", f"{std:.6f}",
                             f"{min(ratios):.6f}", f"{max(ratios):.6f}"])
            print(f"[{time.perf_counter() - t0:7.1f}s] mode={mode} n={n} done", file=sys.stderr)

    out = Path(args.out)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "arm", "fitness_mode", "runs", "mean_ratio", "std_ratio",
                    "min_ratio", "max_ratio"])
        w.writerows(rows)
    print(out)


if __name__ == "__main__":
    main()
