"""Fitness scoring of shot histograms and the reported quality metrics.

Fitness is always in raw cut-value units (maximization). Two scoring modes
exist: the CVaR mean over the best alpha-fraction of shots, and the cut
value of the most frequent bitstring. alpha = 1 recovers the plain
expectation; alpha = 1/shots recovers the single best observed cut, which
is also what max_count degenerates to under infinite shots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import RegularGraph, cut_values
from .qsim import CostDiagonal, ShotHistogram, run_qaoa, sample

UNIQUENESS_DECIMALS = 12


@dataclass(frozen=True)
class FitnessConfig:
    mode: str = "cvar"  # "cvar" | "max_count"
    alpha: float = 0.15
    shots: int = 10_000

    def __post_init__(self):
        if self.mode not in ("cvar", "max_count"):
            raise ValueError(f"unknown fitness mode {self.mode!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.shots <= 0:
            raise ValueError(f"shots must be positive, got {self.shots}")


@dataclass(frozen=True)
class HistogramDigest:
    distinct_words: int
    modal_count: int
    mean_cut: float


@dataclass(frozen=True)
class EvaluationRecord:
    """One scored circuit evaluation: selection fitness plus the absolute best cut seen."""

    fitness: float
    best_cut: int
    digest: HistogramDigest


def _cut_count_pairs(h: ShotHistogram, g: RegularGraph) -> tuple[np.ndarray, np.ndarray]:
    if not h.counts:
        raise ValueError("empty histogram")
    words = np.fromiter(h.counts.keys(), dtype=np.int64, count=len(h.counts))
    counts = np.fromiter(h.counts.values(), dtype=np.int64, count=len(h.counts))
    return cut_values(g, words), counts


def cvar_fitness(h: ShotHistogram, g: RegularGraph, alpha: float) -> float:
    """Mean cut value of the best ceil(alpha * shots) shots."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    cuts, counts = _cut_count_pairs(h, g)
    m = math.ceil(alpha * h.shots)
    order = np.argsort(-cuts, kind="stable")
    remaining = m
    total = 0.0
    for k in order:
        take = min(remaining, int(counts[k]))
        total += take * int(cuts[k])
        remaining -= take
        if remaining == 0:
            break
    return total / m


def max_count_fitness(h: ShotHistogram, g: RegularGraph) -> float:
    """Cut value of the modal bitstring; ties go to the smallest word."""
    if not h.counts:
        raise ValueError("empty histogram")
    modal = min(h.counts, key=lambda w: (-h.counts[w], w))
    cuts = cut_values(g, np.array([modal], dtype=np.int64))
    return float(cuts[0])


def best_observed_cut(h: ShotHistogram, g: RegularGraph) -> int:
    cuts, _ = _cut_count_pairs(h, g)
    return int(cuts.max())


def approximation_ratio(found: float, optimal: int) -> float:
    """Found cut quality divided by the exact optimum."""
    if optimal <= 0:
        raise ValueError(f"optimal cut must be positive, got {optimal}")
    return found / optimal


def uniqueness_ratio(values, n_pop: int) -> float:
    """Distinct values (after rounding to 12 decimals) over population size."""
    values = list(values)
    if n_pop <= 0 or len(values) != n_pop:
        raise ValueError(f"expected {n_pop} values, got {len(values)}")
    distinct = {round(float(v), UNIQUENESS_DECIMALS) for v in values}
    return len(distinct) / n_pop


def score_histogram(h: ShotHistogram, g: RegularGraph, cfg: FitnessConfig) -> EvaluationRecord:
    cuts, counts = _cut_count_pairs(h, g)
    if cfg.mode == "cvar":
        fit = cvar_fitness(h, g, cfg.alpha)
    else:
        fit = max_count_fitness(h, g)
    digest = HistogramDigest(
        distinct_words=len(h.counts),
        modal_count=int(counts.max()),
        mean_cut=float(np.dot(cuts, counts) / h.shots),
    )
    return EvaluationRecord(fitness=fit, best_cut=int(cuts.max()), digest=digest)


def evaluate_angles(
    g: RegularGraph,
    angles: np.ndarray,
    cfg: FitnessConfig,
    rng: np.random.Generator,
    diag: CostDiagonal | None = None,
) -> EvaluationRecord:
    """Full pipeline for one parameter vector: circuit, shots, score."""
    p = len(angles) // 2
    state = run_qaoa(g, angles, p, diag=diag)
    hist = sample(state, cfg.shots, rng)
    return score_histogram(hist, g, cfg)
