#!/usr/bin/env python3
"""Compare single-population against two-island evolution across population sizes.

For each population size, each graph is solved once per strategy: a single
population, and two islands exchanging elites every g_f generations (for
each configured g_f). Writes one CSV row per (n_pop, strategy) with the
mean/min/max approximation ratio over the graph set.
"""
import argparse
import csv
import sys
import time
from pathlib import Path

from eqaoa.evo import EvoConfig, evolve
from eqaoa.fitness import FitnessConfig, approximation_ratio
from eqaoa.graph import generate_regular, max_cut_bruteforce
from eqaoa.islands import run_islands
from eqaoa.rng import derive_seed


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20, help="graph size")
    ap.add_argument("--pop-sizes", type=int, nargs="+", default=[8, 10, 12, 16, 20])
    ap.add_argument("--graphs", type=int, default=10)
    ap.add_argument("--generations", type=int, default=20)
    ap.add_argument("--gf", type=int, nargs="+", default=[5, 7])
    ap.add_argument("--shots", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="population_sweep.csv")
    return ap.parse_args()


def main():
    args = parse_args()
    fitness = FitnessConfig(mode="cvar", alpha=0.15, shots=args.shots)
    instances = []
    for gi in range(args.graphs):
        g = generate_regular(args.n, 3, derive_seed(args.seed, args.n, gi))
        instances.append((g, max_cut_bruteforce(g)[0]))

    rows = []
    t0 = time.perf_counter()
    for n_pop in args.pop_sizes:
        strategies = {"single": []}
        strategies.update({f"islands_gf{f}": [] for f in args.gf})
        for gi, (g, optimal) in enumerate(instances):
            cfg = EvoConfig(n_pop=n_pop, g=args.generations, p=2, fitness=fitness,
                            seed=derive_seed(args.seed, 7, n_pop, gi))
            result = evolve(g, cfg)
            strategies["single"].append(approximation_ratio(result.best_fitness, optimal))
            for f in args.gf:
                multi = run_islands(g, cfg, islands=2, g_f=f)
                strategies[f"islands_gf{f}"].append(
                    approximation_ratio(multi.best_fitness, optimal))
        for name, ratios in strategies.items():
            rows.append([args.n, n_pop, name, len(ratios),
                         f"{sum(ratios) / len(ratios):.6f}",
                         f"{min(ratios):.6f}", f"{max(ratios):.6f}"])
        print(f"[{time.perf_counter() - t0:7.1f}s] n_pop={n_pop} done", file=sys.stderr)

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "n_pop", "strategy", "graphs", "mean_ratio", "min_ratio", "max_ratio"])
        w.writerows(rows)
    print(Path(args.out))


if __name__ == "__main__":
    main()
