#!/usr/bin/env python3
"""Track population diversity with and without elite migration.

Runs a single population and a two-island setup on the same graphs and
exports the per-generation uniqueness ratios (of fitness values and of the
first mixer angle), averaged over graphs. The islands column follows one
island only, so the curves separate exactly at the migration generations.
"""
import argparse
import csv
import sys
import time

import numpy as np

from eqaoa.evo import EvoConfig, evolve
from eqaoa.fitness import FitnessConfig
from eqaoa.graph import generate_regular
from eqaoa.islands import migration_generations, run_islands
from eqaoa.rng import derive_seed


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--graphs", type=int, default=5)
    ap.add_argument("--n-pop", type=int, default=12)
    ap.add_argument("--generations", type=int, default=15)
    ap.add_argument("--gf", type=int, default=5)
    ap.add_argument("--shots", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="diversity_tracking.csv")
    return ap.parse_args()


def main():
    args = parse_args()
    fitness = FitnessConfig(mode="cvar", alpha=0.15, shots=args.shots)
    single = {"fitness": [], "beta1": []}
    multi = {"fitness": [], "beta1": []}
    t0 = time.perf_counter()
    for gi in range(args.graphs):
        g = generate_regular(args.n, 3, derive_seed(args.seed, args.n, gi))
        cfg = EvoConfig(n_pop=args.n_pop, g=args.generations, p=2, fitness=fitness,
                        seed=derive_seed(args.seed, 9, gi))
        res = evolve(g, cfg)
        single["fitness"].append([h.uniqueness_fitness for h in res.history])
        single["beta1"].append([h.uniqueness_beta1 for h in res.history])
        mr = run_islands(g, cfg, islands=2, g_f=args.gf)
        watched = mr.islands[0].history  # follow one island, as on one device
        multi["fitness"].append([h.uniqueness_fitness for h in watched])
        multi["beta1"].append([h.uniqueness_beta1 for h in watched])
        print(f"[{time.perf_counter() - t0:7.1f}s] graph {gi} done", file=sys.stderr)

    barriers = set(migration_generations(args.generations, args.gf))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "migration",
                    "single_uniqueness_fitness", "single_uniqueness_fitness_std",
                    "single_uniqueness_beta1",
                    "islands_uniqueness_fitness", "islands_uniqueness_fitness_std",
                    "islands_uniqueness_beta1"])
        for gen in range(args.generations + 1):
            sf = np.array([series[gen] for series in single["fitness"]])
            sb = np.array([series[gen] for series in single["beta1"]])
            mf = np.array([series[gen] for series in multi["fitness"]])
            mb = np.array([series[gen] for series in multi["beta1"]])
            w.writerow([gen, int(gen in barriers),
                        f"{sf.mean():.6f}", f"{sf.std():.6f}", f"{sb.mean():.6f}",
                        f"{mf.mean():.6f}", f"{mf.std():.6f}", f"{mb.mean():.6f}"])
    print(args.out)


if __name__ == "__main__":
    main()
