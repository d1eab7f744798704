"""Self-adaptive evolutionary optimization of the QAOA angles.

A genotype carries 2p circuit angles interleaved as
[beta_1, gamma_1, ..., beta_p, gamma_p] plus one mutation step size per
angle gene. Each generation: parents are picked by per-pair stochastic
universal sampling on min-shifted fitness, recombined by whole arithmetic
crossover with a single mixing weight per pair, mutated through the
lognormal self-adaptation rule (step sizes first, then angles), and the
offspring replace the parents unless the best parent still beats every
offspring, in which case the mu best parents displace the mu worst
offspring.

All randomness is drawn from substreams keyed by
(seed, purpose, island, generation, index), so transcripts are exactly
reproducible regardless of scheduling, interruption, or deployment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .fitness import EvaluationRecord, FitnessConfig, evaluate_angles, uniqueness_ratio
from .graph import RegularGraph
from .qsim import CostDiagonal, build_cost_diagonal

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle or array of angles into the periodic domain (-pi, pi]."""
    r = np.mod(a, TWO_PI)
    if isinstance(r, np.ndarray):
        return np.where(r > math.pi, r - TWO_PI, r)
    return r - TWO_PI if r > math.pi else r


@dataclass(frozen=True)
class Genotype:
    """2p angle genes in (-pi, pi] and their positive mutation step sizes."""

    angles: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        if self.angles.shape != self.sigmas.shape or self.angles.ndim != 1:
            raise ValueError("angles and sigmas must be 1-D arrays of equal length")

    @property
    def p(self) -> int:
        return len(self.angles) // 2

    def copy(self) -> "Genotype":
        return Genotype(angles=self.angles.copy(), sigmas=self.sigmas.copy())


@dataclass
class Individual:
    genotype: Genotype
    id: int
    lineage: tuple[int, ...] = ()
    evaluation: EvaluationRecord | None = None


@dataclass(frozen=True)
class EvoConfig:
    """Evolution parameters; defaults are the standard benchmark settings."""

    n_pop: int = 10
    g: int = 10
    p: int = 2
    p_sigma: float = 0.2
    sigma_min: float = 0.1
    mu: int = 1
    tau: float | None = None        # default sqrt(2)/2 * n_pop^(-1/4)
    tau_prime: float | None = None  # default sqrt(2)/2 * n_pop^(-1/2)
    fitness: FitnessConfig = field(default_factory=FitnessConfig)
    seed: int = 0
    cache_evaluations: bool = False  # True: survivors keep recorded fitness instead of re-sampling

    def __post_init__(self):
        if self.n_pop < 4 or self.n_pop % 2 != 0:
            raise ValueError(f"n_pop must be even and >= 4, got {self.n_pop}")
        if self.g < 0:
            raise ValueError(f"generation count must be >= 0, got {self.g}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 0.0 <= self.p_sigma <= 1.0:
            raise ValueError(f"p_sigma must be in [0, 1], got {self.p_sigma}")
        if self.sigma_min <= 0:
            raise ValueError(f"sigma_min must be positive, got {self.sigma_min}")
        if not 1 <= self.mu <= self.n_pop:
            raise ValueError(f"mu must be in [1, n_pop], got {self.mu}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    @property
    def tau_value(self) -> float:
        return self.tau if self.tau is not None else math.sqrt(2) / 2 * self.n_pop ** -0.25

    @property
    def tau_prime_value(self) -> float:
        return self.tau_prime if self.tau_prime is not None else math.sqrt(2) / 2 * self.n_pop ** -0.5


@dataclass(frozen=True)
class GenerationStats:
    """Observer record emitted once per generation."""

    generation: int
    ids: tuple[int, ...]
    fitness: tuple[float, ...]
    best_cut: tuple[int, ...]
    uniqueness_fitness: float
    uniqueness_beta1: float
    elite_id: int
    best_ever_cut: int
    best_ever_fitness: float
    evaluations: int  # cumulative over the run


@dataclass(frozen=True)
class BestRecord:
    genotype: Genotype
    fitness: float
    best_cut: int
    generation: int


@dataclass
class IslandState:
    """One population between generations; everything a checkpoint must carry.

    The RNG position is implicit: every stream is derived from
    (seed, purpose, island_id, generation, ...), so the generation counter
    pins all future randomness.
    """

    island_id: int
    population: list[Individual]
    generation: int
    next_id: int
    best_by_fitness: BestRecord
    best_by_cut: BestRecord
    history: list[GenerationStats] = field(default_factory=list)
    migration_log: list = field(default_factory=list)
    packet_rejections: list[dict] = field(default_factory=list)
    evaluations: int = 0
    mid_generation: bool = False


@dataclass(frozen=True)
class EvalContext:
    """Per-run immutables shared by every evaluation."""

    graph: RegularGraph
    diag: CostDiagonal
    cfg: EvoConfig


def make_context(g: RegularGraph, cfg: EvoConfig) -> EvalContext:
    return EvalContext(graph=g, diag=build_cost_diagonal(g), cfg=cfg)


def init_population(cfg: EvoConfig, rng: np.random.Generator, first_id: int = 0) -> list[Individual]:
    """n_pop random individuals: angles uniform on (-pi, pi], sigmas |N(0,1)| clipped to [sigma_min, 1]."""
    pop = []
    for k in range(cfg.n_pop):
        angles = math.pi - rng.uniform(0.0, TWO_PI, size=2 * cfg.p)
        sigmas = np.clip(np.abs(rng.standard_normal(2 * cfg.p)), cfg.sigma_min, 1.0)
        pop.append(Individual(genotype=Genotype(angles=angles, sigmas=sigmas), id=first_id + k))
    return pop


def _draw_from_wheel(cdf: np.ndarray, weights: np.ndarray, point: float) -> int:
    idx = int(np.searchsorted(cdf, point, side="right"))
    idx = min(idx, len(cdf) - 1)
    while weights[idx] == 0.0:  # zero-width segment hit by float rounding
        idx -= 1
    return idx


def sus_select(pop: list[Individual], rng: np.random.Generator) -> list[tuple[Individual, Individual]]:
    """Draw n_pop/2 parent pairs by stochastic universal sampling.

    Weights are min-shifted fitness values, so the strictly least-fit
    individual has zero selection probability; when every fitness is equal
    the weights fall back to uniform. Each pair uses two pointers half a
    wheel apart. If both land on the same individual (possible only when
    it holds more than half the total weight) the partner is redrawn from
    the remaining individuals with renormalized weights, since an
    individual cannot pair with itself.
    """
    if len(pop) < 4:
        raise ValueError(f"selection needs a population of >= 4, got {len(pop)}")
    if any(ind.evaluation is None for ind in pop):
        raise ValueError("population must be fully evaluated before selection")
    fit = np.array([ind.evaluation.fitness for ind in pop], dtype=np.float64)
    weights = fit - fit.min()
    if weights.sum() == 0.0:
        weights = np.ones_like(weights)
    weights = weights / weights.sum()
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0

    pairs = []
    for _ in range(len(pop) // 2):
        u = rng.random()
        a = _draw_from_wheel(cdf, weights, u)
        b = _draw_from_wheel(cdf, weights, (u + 0.5) % 1.0)
        if a == b:
            others = weights.copy()
            others[a] = 0.0
            if others.sum() == 0.0:
                others = np.ones(len(weights))
                others[a] = 0.0
            others = others / others.sum()
            ocdf = np.cumsum(others)
            ocdf[-1] = 1.0
            b = _draw_from_wheel(ocdf, others, rng.random())
        pairs.append((pop[a], pop[b]))
    return pairs


def crossover(
    a: Genotype, b: Genotype, rng: np.random.Generator, sigma_min: float = 0.1
) -> tuple[Genotype, Genotype]:
    """Whole arithmetic crossover with one mixing weight per pair.

    Child 1 gets w*a + (1-w)*b on every gene, angles and step sizes alike;
    child 2 is the mirror image, so the pair's gene-wise mean is preserved.
    Domain clamps are reapplied afterwards (a no-op for convex mixes).
    """
    if a.angles.shape != b.angles.shape:
        raise ValueError("parents must share the same layer count")
    w = rng.random()
    return (
        Genotype(
            angles=wrap_angle(w * a.angles + (1.0 - w) * b.angles),
            sigmas=np.maximum(w * a.sigmas + (1.0 - w) * b.sigmas, sigma_min),
        ),
        Genotype(
            angles=wrap_angle((1.0 - w) * a.angles + w * b.angles),
            sigmas=np.maximum((1.0 - w) * a.sigmas + w * b.sigmas, sigma_min),
        ),
    )


def mutate(y: Genotype, cfg: EvoConfig, rng: np.random.Generator) -> Genotype:
    """Lognormal self-adaptive mutation.

    One shared normal deviate scales the whole genotype (tau' term); each
    gene is then independently selected with probability p_sigma, its step
    size multiplied by exp(tau'*N_shared + tau*N_k) and clamped to at
    least sigma_min, and its angle perturbed by the new step size times a
    fresh normal deviate, wrapped back into (-pi, pi]. Unselected genes
    keep both their angle and step size.
    """
    k = len(y.angles)
    shared = rng.standard_normal()
    selected = rng.random(k) < cfg.p_sigma
    sigma_noise = rng.standard_normal(k)
    angle_noise = rng.standard_normal(k)

    new_sigmas = y.sigmas * np.exp(cfg.tau_prime_value * shared + cfg.tau_value * sigma_noise)
    new_sigmas = np.maximum(new_sigmas, cfg.sigma_min)
    new_angles = wrap_angle(y.angles + new_sigmas * angle_noise)

    return Genotype(
        angles=np.where(selected, new_angles, y.angles),
        sigmas=np.where(selected, new_sigmas, y.sigmas),
    )


def elitist_replace(
    parents: list[Individual], offspring: list[Individual], mu: int
) -> list[Individual]:
    """Inject the mu best parents when no offspring reaches the best parent's fitness."""
    if len(parents) != len(offspring):
        raise ValueError("parent and offspring populations must match in size")
    if any(ind.evaluation is None for ind in parents + offspring):
        raise ValueError("both populations must be fully evaluated")
    best_parent = max(ind.evaluation.fitness for ind in parents)
    best_child = max(ind.evaluation.fitness for ind in offspring)
    if best_child >= best_parent:
        return list(offspring)
    elites = sorted(parents, key=lambda i: (-i.evaluation.fitness, i.id))[:mu]
    out = list(offspring)
    # weakest offspring go first; fitness ties resolve toward the younger one
    victims = sorted(range(len(out)), key=lambda k: (out[k].evaluation.fitness, -out[k].id))[:mu]
    for v, elite in zip(victims, elites):
        out[v] = elite
    return out


def _evaluate_pass(
    pop: list[Individual],
    ctx: EvalContext,
    generation: int,
    phase: int,
    state: IslandState,
) -> None:
    """Evaluate every unevaluated individual on its pre-assigned substream.

    Stream identity is (seed, EVAL, island, generation, phase, index), so
    evaluations may run in any order, or concurrently, without changing
    results.
    """
    cfg = ctx.cfg
    for idx, ind in enumerate(pop):
        if ind.evaluation is not None:
            continue
        r = streams.substream(cfg.seed, streams.EVAL, state.island_id, generation, phase, idx)
        ind.evaluation = evaluate_angles(ctx.graph, ind.genotype.angles, cfg.fitness, r, diag=ctx.diag)
        state.evaluations += 1
        rec = ind.evaluation
        if (rec.fitness, rec.best_cut) > (state.best_by_fitness.fitness, state.best_by_fitness.best_cut):
            state.best_by_fitness = BestRecord(ind.genotype.copy(), rec.fitness, rec.best_cut, generation)
        if (rec.best_cut, rec.fitness) > (state.best_by_cut.best_cut, state.best_by_cut.fitness):
            state.best_by_cut = BestRecord(ind.genotype.copy(), rec.fitness, rec.best_cut, generation)


def _record_generation(state: IslandState, cfg: EvoConfig) -> GenerationStats:
    pop = state.population
    stats = GenerationStats(
        generation=state.generation,
        ids=tuple(ind.id for ind in pop),
        fitness=tuple(ind.evaluation.fitness for ind in pop),
        best_cut=tuple(ind.evaluation.best_cut for ind in pop),
        uniqueness_fitness=uniqueness_ratio([i.evaluation.fitness for i in pop], cfg.n_pop),
        uniqueness_beta1=uniqueness_ratio([i.genotype.angles[0] for i in pop], cfg.n_pop),
        elite_id=max(pop, key=lambda i: (i.evaluation.fitness, -i.id)).id,
        best_ever_cut=state.best_by_cut.best_cut,
        best_ever_fitness=state.best_by_fitness.fitness,
        evaluations=state.evaluations,
    )
    state.history.append(stats)
    return stats


def new_island(ctx: EvalContext, island_id: int = 0) -> IslandState:
    """Initialize and evaluate generation 0 of one island."""
    cfg = ctx.cfg
    pop = init_population(cfg, streams.substream(cfg.seed, streams.INIT, island_id))
    sentinel = BestRecord(genotype=pop[0].genotype.copy(), fitness=-math.inf, best_cut=-1, generation=0)
    state = IslandState(
        island_id=island_id,
        population=pop,
        generation=0,
        next_id=cfg.n_pop,
        best_by_fitness=sentinel,
        best_by_cut=sentinel,
    )
    _evaluate_pass(pop, ctx, 0, streams.PARENT_PASS, state)
    _record_generation(state, cfg)
    return state


def advance_generation(state: IslandState, ctx: EvalContext) -> GenerationStats:
    """Run one full generation in place and return its stats record."""
    cfg = ctx.cfg
    isl = state.island_id
    gen = state.generation + 1
    state.mid_generation = True

    # Survivors get fresh sampling noise each generation unless evaluations
    # are cached. Generation 1 reuses the generation-0 evaluation, which is
    # moments old; immigrants and anything else unevaluated are always done.
    if not cfg.cache_evaluations and gen > 1:
        for ind in state.population:
            ind.evaluation = None
    _evaluate_pass(state.population, ctx, gen, streams.PARENT_PASS, state)

    pairs = sus_select(state.population, streams.substream(cfg.seed, streams.SELECT, isl, gen))
    offspring: list[Individual] = []
    for j, (pa, pb) in enumerate(pairs):
        c1, c2 = crossover(
            pa.genotype, pb.genotype,
            streams.substream(cfg.seed, streams.CROSSOVER, isl, gen, j),
            sigma_min=cfg.sigma_min,
        )
        for k, child in enumerate((c1, c2)):
            mutated = mutate(
                child, cfg, streams.substream(cfg.seed, streams.MUTATE, isl, gen, 2 * j + k)
            )
            offspring.append(
                Individual(genotype=mutated, id=state.next_id, lineage=(pa.id, pb.id))
            )
            state.next_id += 1

    _evaluate_pass(offspring, ctx, gen, streams.OFFSPRING_PASS, state)
    state.population = elitist_replace(state.population, offspring, cfg.mu)
    state.generation = gen
    stats = _record_generation(state, cfg)
    state.mid_generation = False
    return stats


@dataclass(frozen=True)
class RunResult:
    """Arm-agnostic outcome: the best parameters found and the full transcript."""

    best_genotype: Genotype
    best_fitness: float        # solution quality the arm reports, in cut units
    best_cut: int              # absolute best single cut observed anywhere in the run
    best_generation: int
    history: tuple[GenerationStats, ...]
    evaluations: int
    seed: int


def finalize(state: IslandState, seed: int) -> RunResult:
    return RunResult(
        best_genotype=state.best_by_fitness.genotype,
        best_fitness=state.best_by_fitness.fitness,
        best_cut=state.best_by_cut.best_cut,
        best_generation=state.best_by_fitness.generation,
        history=tuple(state.history),
        evaluations=state.evaluations,
        seed=seed,
    )


def evolve(g: RegularGraph, cfg: EvoConfig, hooks=None) -> RunResult:
    """Run a single-population optimization for cfg.g generations.

    ``hooks``, if given, is called with each GenerationStats as it is
    produced; generation 0 is the evaluated initial population.
    """
    ctx = make_context(g, cfg)
    state = new_island(ctx, island_id=0)
    if hooks is not None:
        hooks(state.history[0])
    for _ in range(cfg.g):
        stats = advance_generation(state, ctx)
        if hooks is not None:
            hooks(stats)
    return finalize(state, cfg.seed)
