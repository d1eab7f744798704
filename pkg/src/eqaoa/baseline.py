"""Gradient-free local baseline driving the same evaluation pipeline.

The control arm minimizes the negated sampling fitness over the 2p angles
with COBYLA, restarted from independent uniform-random points. Each
objective call draws its shots from a substream keyed by
(seed, restart, call index), so traces are exactly reproducible and each
restart depends only on its own seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import rng as streams
from .evo import EvoConfig, evolve, wrap_angle
from .fitness import FitnessConfig, approximation_ratio, evaluate_angles
from .graph import RegularGraph, max_cut_bruteforce
from .qsim import build_cost_diagonal

OPTIMIZER_NAME = "cobyla"


@dataclass(frozen=True)
class BaselineConfig:
    iterations: int = 10  # objective-evaluation budget per restart
    restarts: int = 10
    p: int = 2
    rho_begin: float = 1.0  # initial trust-region radius
    fitness: FitnessConfig = field(default_factory=FitnessConfig)
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class IterationPoint:
    iteration: int
    fitness: float
    best_cut: int
    best_fitness_so_far: float
    best_cut_so_far: int


@dataclass(frozen=True)
class RestartTrace:
    restart: int
    points: tuple[IterationPoint, ...]
    best_angles: np.ndarray
    best_fitness: float
    best_cut: int


@dataclass(frozen=True)
class BaselineResult:
    traces: tuple[RestartTrace, ...]
    best_angles: np.ndarray
    best_fitness: float
    best_cut: int
    evaluations: int
    optimizer: str = OPTIMIZER_NAME


class _BudgetExhausted(Exception):
    pass


def minimize_restart(objective, x0: np.ndarray, budget: int, rho_begin: float = 1.0):
    """Run one budget-capped COBYLA descent of ``objective`` from ``x0``.

    ``objective`` maps an angle vector to a value to minimize; the wrapper
    stops the optimizer the moment the evaluation budget is spent, which
    is normal termination, not an error.
    """
    calls = 0

    def capped(x):
        nonlocal calls
        if calls >= budget:
            raise _BudgetExhausted
        calls += 1
        return objective(np.asarray(x, dtype=np.float64))

    try:
        minimize(
            capped,
            x0,
            method="COBYLA",
            options={"maxiter": budget, "rhobeg": rho_begin},
        )
    except _BudgetExhausted:
        pass
    return calls


def run_restart(
    g: RegularGraph, cfg: BaselineConfig, restart: int, diag=None
) -> RestartTrace:
    """One independent COBYLA run; all randomness comes from (cfg.seed, restart)."""
    if diag is None:
        diag = build_cost_diagonal(g)
    init_rng = streams.substream(cfg.seed, streams.BASELINE_INIT, restart)
    x0 = np.pi - init_rng.uniform(0.0, 2.0 * np.pi, size=2 * cfg.p)

    points: list[IterationPoint] = []
    best = {"fitness": -np.inf, "cut": -1, "angles": x0.copy()}

    def objective(x: np.ndarray) -> float:
        angles = wrap_angle(x)
        call = len(points)
        r = streams.substream(cfg.seed, streams.BASELINE_EVAL, restart, call)
        rec = evaluate_angles(g, angles, cfg.fitness, r, diag=diag)
        if (rec.fitness, rec.best_cut) > (best["fitness"], best["cut"]):
            best["fitness"], best["cut"], best["angles"] = rec.fitness, rec.best_cut, angles.copy()
        points.append(
            IterationPoint(
                iteration=call,
                fitness=rec.fitness,
                best_cut=rec.best_cut,
                best_fitness_so_far=best["fitness"],
                best_cut_so_far=max(rec.best_cut, points[-1].best_cut_so_far) if points else rec.best_cut,
            )
        )
        return -rec.fitness

    minimize_restart(objective, x0, cfg.iterations, cfg.rho_begin)
    return RestartTrace(
        restart=restart,
        points=tuple(points),
        best_angles=best["angles"],
        best_fitness=best["fitness"],
        best_cut=max(pt.best_cut for pt in points),
    )


def optimize_local(g: RegularGraph, cfg: BaselineConfig) -> BaselineResult:
    """All restarts; the result carries the best point and every trace."""
    diag = build_cost_diagonal(g)
    traces = tuple(run_restart(g, cfg, r, diag=diag) for r in range(cfg.restarts))
    best = max(traces, key=lambda t: (t.best_fitness, t.best_cut, -t.restart))
    return BaselineResult(
        traces=traces,
        best_angles=best.best_angles,
        best_fitness=best.best_fitness,
        best_cut=max(t.best_cut for t in traces),
        evaluations=sum(len(t.points) for t in traces),
    )


@dataclass(frozen=True)
class ArmSummary:
    ratios: tuple[float, ...]
    mean: float
    std: float
    min: float
    max: float
    evaluations_per_run: tuple[int, ...]


@dataclass(frozen=True)
class ComparisonRecord:
    ea: ArmSummary
    baseline: ArmSummary
    optimal_cut: int
    budget_mode: str  # "literal" | "matched"


def _summary(ratios: list[float], evals: list[int]) -> ArmSummary:
    arr = np.asarray(ratios, dtype=np.float64)
    return ArmSummary(
        ratios=tuple(arr.tolist()),
        mean=float(arr.mean()),
        std=float(arr.std()),
        min=float(arr.min()),
        max=float(arr.max()),
        evaluations_per_run=tuple(evals),
    )


def compare_arms(
    g: RegularGraph,
    evo_cfg: EvoConfig,
    baseline_cfg: BaselineConfig,
    repetitions: int = 10,
    budget_mode: str = "literal",
) -> ComparisonRecord:
    """Run both arms on one graph and summarize approximation ratios.

    "literal" keeps each arm's own configured budget (the conventional
    comparison of g generations against a fixed iteration count, which
    leaves the objective-evaluation counts unequal); "matched" raises the
    baseline's per-restart budget to the evolutionary arm's per-run
    evaluation count.
    """
    if budget_mode not in ("literal", "matched"):
        raise ValueError(f"unknown budget mode {budget_mode!r}")
    optimal, _ = max_cut_bruteforce(g)

    ea_ratios, ea_evals = [], []
    for rep in range(repetitions):
        run_cfg = replace(evo_cfg, seed=streams.derive_seed(evo_cfg.seed, rep))
        result = evolve(g, run_cfg)
        ea_ratios.append(approximation_ratio(result.best_fitness, optimal))
        ea_evals.append(result.evaluations)

    cfg = replace(baseline_cfg, restarts=repetitions)
    if budget_mode == "matched":
        cfg = replace(cfg, iterations=max(ea_evals))
    base = optimize_local(g, cfg)
    base_ratios = [approximation_ratio(t.best_fitness, optimal) for t in base.traces]
    base_evals = [len(t.points) for t in base.traces]

    return ComparisonRecord(
        ea=_summary(ea_ratios, ea_evals),
        baseline=_summary(base_ratios, base_evals),
        optimal_cut=optimal,
        budget_mode=budget_mode,
    )
