"""Multi-population orchestration with elite migration between islands.

M islands evolve independently in epochs of g_f generations. At each
epoch barrier every island's elite, chosen by the absolute best cut value
observed in its shot distribution rather than by selection fitness, is
packed into a wire message and sent to the next island on the ring, where
it replaces the weakest resident. Packets cross the wire in both the
in-process and multi-process deployments, so the two are byte-identical.

Checkpoints snapshot a whole island between generations; restoring one
and continuing reproduces the uninterrupted transcript exactly, because
all randomness is derived from (seed, island, generation) rather than
from mutable generator state.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .evo import (
    BestRecord,
    EvoConfig,
    GenerationStats,
    Genotype,
    Individual,
    IslandState,
    advance_generation,
    make_context,
    new_island,
)
from .fitness import EvaluationRecord, HistogramDigest, uniqueness_ratio
from .graph import RegularGraph

PACKET_VERSION = 1
CHECKPOINT_VERSION = 1
CHECKPOINT_FORMAT = "eqaoa-island-checkpoint"


class PacketError(ValueError):
    """Malformed, truncated, or wrong-version elite packet."""


class CheckpointError(ValueError):
    """Unusable checkpoint: bad version, corrupt payload, or mid-generation state."""


@dataclass(frozen=True)
class MigrationEvent:
    at_generation: int
    from_island: int
    to_island: int
    angles: tuple[float, ...]
    sigmas: tuple[float, ...]
    best_cut: int
    replaced_id: int
    replaced_best_cut: int


@dataclass(frozen=True)
class ElitePacket:
    version: int
    from_island: int
    at_generation: int
    angles: tuple[float, ...]
    sigmas: tuple[float, ...]
    best_cut: int
    checksum: int


def _f17(x: float) -> str:
    # 17 significant digits round-trip any float64 exactly
    return format(float(x), ".17g")


def _packet_payload(
    from_island: int, at_generation: int, angles, sigmas, best_cut: int
) -> str:
    return (
        '{"version":%d,"from_island":%d,"at_generation":%d,'
        '"angles":[%s],"sigmas":[%s],"best_cut":%d}'
        % (
            PACKET_VERSION,
            from_island,
            at_generation,
            ",".join(_f17(a) for a in angles),
            ",".join(_f17(s) for s in sigmas),
            best_cut,
        )
    )


def packet_checksum(packet: ElitePacket) -> int:
    """CRC32 of the canonical payload bytes (all fields except the checksum)."""
    payload = _packet_payload(
        packet.from_island, packet.at_generation, packet.angles, packet.sigmas, packet.best_cut
    )
    return zlib.crc32(payload.encode("utf-8"))


def make_packet(migrant: Individual, from_island: int, at_generation: int) -> ElitePacket:
    if migrant.evaluation is None:
        raise ValueError("migrant must be evaluated")
    packet = ElitePacket(
        version=PACKET_VERSION,
        from_island=from_island,
        at_generation=at_generation,
        angles=tuple(float(a) for a in migrant.genotype.angles),
        sigmas=tuple(float(s) for s in migrant.genotype.sigmas),
        best_cut=migrant.evaluation.best_cut,
        checksum=0,
    )
    return replace(packet, checksum=packet_checksum(packet))


def encode_packet(packet: ElitePacket) -> bytes:
    """Length-prefixed UTF-8 JSON frame; floats carry 17 significant digits."""
    payload = _packet_payload(
        packet.from_island, packet.at_generation, packet.angles, packet.sigmas, packet.best_cut
    )
    body = '{"checksum":%d,%s' % (packet.checksum, payload[1:])
    raw = body.encode("utf-8")
    return len(raw).to_bytes(4, "big") + raw


def decode_packet(frame: bytes) -> ElitePacket:
    """Parse a frame. Raises PacketError on structural problems; a checksum
    mismatch is left for the receiver to detect via packet_checksum."""
    if len(frame) < 4:
        raise PacketError("frame shorter than its length prefix")
    length = int.from_bytes(frame[:4], "big")
    if len(frame) != 4 + length:
        raise PacketError(f"frame length {len(frame) - 4} does not match prefix {length}")
    try:
        obj = json.loads(frame[4:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PacketError(f"undecodable packet body: {exc}") from exc
    try:
        packet = ElitePacket(
            version=int(obj["version"]),
            from_island=int(obj["from_island"]),
            at_generation=int(obj["at_generation"]),
            angles=tuple(float(a) for a in obj["angles"]),
            sigmas=tuple(float(s) for s in obj["sigmas"]),
            best_cut=int(obj["best_cut"]),
            checksum=int(obj["checksum"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PacketError(f"packet missing or malformed field: {exc}") from exc
    if packet.version != PACKET_VERSION:
        raise PacketError(f"unsupported packet version {packet.version}")
    return packet


def select_migrant(island: IslandState) -> Individual:
    """The resident with the best absolute cut; ties broken by higher
    selection fitness, then by lower id."""
    if any(ind.evaluation is None for ind in island.population):
        raise ValueError("population must be fully evaluated to select a migrant")
    return max(
        island.population,
        key=lambda i: (i.evaluation.best_cut, i.evaluation.fitness, -i.id),
    )


def _weakest_index(pop: list[Individual]) -> int:
    """Lowest best cut; ties broken by lower selection fitness, then higher id."""
    return min(
        range(len(pop)),
        key=lambda k: (pop[k].evaluation.best_cut, pop[k].evaluation.fitness, -pop[k].id),
    )


def apply_immigrant(island: IslandState, packet: ElitePacket, cfg: EvoConfig) -> IslandState:
    """Replace the weakest resident with the packet's genotype.

    A packet whose checksum does not validate, or whose genotype breaks
    the angle/step-size invariants, is rejected and logged; the island
    continues unchanged. The immigrant arrives unevaluated and is scored
    in the next generation's normal evaluation pass.
    """
    if packet_checksum(packet) != packet.checksum:
        island.packet_rejections.append(
            {
                "at_generation": island.generation,
                "from_island": packet.from_island,
                "reason": "checksum mismatch",
            }
        )
        return island
    angles = np.asarray(packet.angles, dtype=np.float64)
    sigmas = np.asarray(packet.sigmas, dtype=np.float64)
    if (
        angles.shape != (2 * cfg.p,)
        or sigmas.shape != (2 * cfg.p,)
        or np.any(angles <= -np.pi)
        or np.any(angles > np.pi)
        or np.any(sigmas < cfg.sigma_min)
    ):
        island.packet_rejections.append(
            {
                "at_generation": island.generation,
                "from_island": packet.from_island,
                "reason": "genotype invariants violated",
            }
        )
        return island
    if any(ind.evaluation is None for ind in island.population):
        raise ValueError("population must be fully evaluated before immigration")

    victim_idx = _weakest_index(island.population)
    victim = island.population[victim_idx]
    immigrant = Individual(
        genotype=Genotype(angles=angles, sigmas=sigmas),
        id=island.next_id,
        lineage=(),
    )
    island.next_id += 1
    island.population[victim_idx] = immigrant
    island.migration_log.append(
        MigrationEvent(
            at_generation=island.generation,
            from_island=packet.from_island,
            to_island=island.island_id,
            angles=packet.angles,
            sigmas=packet.sigmas,
            best_cut=packet.best_cut,
            replaced_id=victim.id,
            replaced_best_cut=victim.evaluation.best_cut,
        )
    )
    return island


def migration_generations(g: int, g_f: int) -> list[int]:
    """Barrier generations: multiples of g_f strictly below g (none at termination)."""
    return [k for k in range(g_f, g, g_f)]


@dataclass(frozen=True)
class MultiRunResult:
    islands: tuple[IslandState, ...]
    best_genotype: Genotype
    best_fitness: float
    best_cut: int
    best_island: int
    pooled_uniqueness: tuple[dict, ...]  # per generation, across all islands
    evaluations: int
    completed: bool


def _pooled_uniqueness(states: list[IslandState], n_pop: int) -> tuple[dict, ...]:
    gens = min(len(s.history) for s in states)
    rows = []
    for k in range(gens):
        # pooled beta_1 uniqueness would need raw gene values, which the
        # per-generation records do not retain; islands report it locally
        fitness_values = [v for s in states for v in s.history[k].fitness]
        rows.append(
            {
                "generation": states[0].history[k].generation,
                "uniqueness_fitness": uniqueness_ratio(fitness_values, n_pop * len(states)),
            }
        )
    return tuple(rows)


def _advance_epoch(args):
    state, ctx, generations = args
    for _ in range(generations):
        advance_generation(state, ctx)
    return state


def _exchange_elites(states: list[IslandState], cfg: EvoConfig) -> None:
    m = len(states)
    frames = [
        encode_packet(make_packet(select_migrant(states[i]), i, states[i].generation))
        for i in range(m)
    ]
    for i in range(m):
        apply_immigrant(states[(i + 1) % m], decode_packet(frames[i]), cfg)


def checkpoint_path(directory, island_id: int, generation: int) -> Path:
    return Path(directory) / f"island-{island_id}-gen-{generation}.ckpt"


def checkpoint(island: IslandState, cfg: EvoConfig) -> bytes:
    """Serialize an island between generations as versioned JSON."""
    if island.mid_generation:
        raise CheckpointError("cannot checkpoint mid-generation")
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": _config_doc(cfg),
        "island_id": island.island_id,
        "generation": island.generation,
        "next_id": island.next_id,
        "evaluations": island.evaluations,
        "population": [_individual_doc(ind) for ind in island.population],
        "best_by_fitness": _best_doc(island.best_by_fitness),
        "best_by_cut": _best_doc(island.best_by_cut),
        "history": [asdict(h) for h in island.history],
        "migration_log": [asdict(e) for e in island.migration_log],
        "packet_rejections": island.packet_rejections,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def restore(snapshot: bytes, cfg: EvoConfig) -> IslandState:
    try:
        doc = json.loads(snapshot.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not an island checkpoint: format={doc.get('format')!r}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    if doc.get("config") != _config_doc(cfg):
        raise CheckpointError("checkpoint was written under a different configuration")
    state = IslandState(
        island_id=doc["island_id"],
        population=[_individual_from_doc(d) for d in doc["population"]],
        generation=doc["generation"],
        next_id=doc["next_id"],
        best_by_fitness=_best_from_doc(doc["best_by_fitness"]),
        best_by_cut=_best_from_doc(doc["best_by_cut"]),
        history=[GenerationStats(**_stats_kwargs(h)) for h in doc["history"]],
        migration_log=[MigrationEvent(**_event_kwargs(e)) for e in doc["migration_log"]],
        packet_rejections=list(doc["packet_rejections"]),
        evaluations=doc["evaluations"],
    )
    return state


def _config_doc(cfg: EvoConfig) -> dict:
    doc = asdict(cfg)
    doc["tau"] = cfg.tau_value
    doc["tau_prime"] = cfg.tau_prime_value
    return doc


def _individual_doc(ind: Individual) -> dict:
    return {
        "id": ind.id,
        "lineage": list(ind.lineage),
        "angles": [float(a) for a in ind.genotype.angles],
        "sigmas": [float(s) for s in ind.genotype.sigmas],
        "evaluation": None
        if ind.evaluation is None
        else {
            "fitness": ind.evaluation.fitness,
            "best_cut": ind.evaluation.best_cut,
            "digest": asdict(ind.evaluation.digest),
        },
    }


def _individual_from_doc(doc: dict) -> Individual:
    ev = doc["evaluation"]
    return Individual(
        genotype=Genotype(
            angles=np.array(doc["angles"], dtype=np.float64),
            sigmas=np.array(doc["sigmas"], dtype=np.float64),
        ),
        id=doc["id"],
        lineage=tuple(doc["lineage"]),
        evaluation=None
        if ev is None
        else EvaluationRecord(
            fitness=ev["fitness"],
            best_cut=ev["best_cut"],
            digest=HistogramDigest(**ev["digest"]),
        ),
    )


def _best_doc(b: BestRecord) -> dict:
    return {
        "angles": [float(a) for a in b.genotype.angles],
        "sigmas": [float(s) for s in b.genotype.sigmas],
        "fitness": b.fitness,
        "best_cut": b.best_cut,
        "generation": b.generation,
    }


def _best_from_doc(doc: dict) -> BestRecord:
    return BestRecord(
        genotype=Genotype(
            angles=np.array(doc["angles"], dtype=np.float64),
            sigmas=np.array(doc["sigmas"], dtype=np.float64),
        ),
        fitness=doc["fitness"],
        best_cut=doc["best_cut"],
        generation=doc["generation"],
    )


def _stats_kwargs(doc: dict) -> dict:
    out = dict(doc)
    for key in ("ids", "fitness", "best_cut"):
        out[key] = tuple(out[key])
    return out


def _event_kwargs(doc: dict) -> dict:
    out = dict(doc)
    out["angles"] = tuple(out["angles"])
    out["sigmas"] = tuple(out["sigmas"])
    return out


def run_islands(
    g: RegularGraph,
    cfg: EvoConfig,
    islands: int = 2,
    g_f: int = 5,
    workers: str = "inline",
    checkpoint_dir=None,
    resume_states: list[IslandState] | None = None,
    stop_after_generation: int | None = None,
) -> MultiRunResult:
    """Evolve M islands with elite exchange every g_f generations.

    ``workers`` selects the deployment: "inline" steps the islands in this
    process, "process" runs each epoch in separate OS processes. Both
    route elites through the same wire encoding, and all randomness is
    derived from (seed, island, generation), so results are identical.
    ``stop_after_generation`` ends the session early at that barrier
    (checkpoints are still written), mirroring a re-queued job.
    """
    if islands < 2:
        raise ValueError(f"need at least 2 islands, got {islands}")
    if g_f < 1:
        raise ValueError(f"migration interval must be >= 1, got {g_f}")
    if workers not in ("inline", "process"):
        raise ValueError(f"unknown worker deployment {workers!r}")

    ctx = make_context(g, cfg)
    if resume_states is not None:
        states = resume_states
        if len(states) != islands:
            raise CheckpointError(f"resume provided {len(states)} islands, expected {islands}")
    else:
        states = [new_island(ctx, island_id=i) for i in range(islands)]
        if checkpoint_dir is not None:
            _write_checkpoints(states, cfg, checkpoint_dir)

    barriers = migration_generations(cfg.g, g_f)
    current = states[0].generation
    if any(s.generation != current for s in states):
        raise CheckpointError("islands disagree on current generation; cannot resume")

    boundaries = sorted({b for b in barriers if b > current} | {cfg.g})
    completed = True
    for boundary in boundaries:
        step = boundary - current
        if workers == "process":
            states = _advance_epoch_processes(states, ctx, step)
        else:
            states = [_advance_epoch((s, ctx, step)) for s in states]
        current = boundary
        if boundary in barriers:
            _exchange_elites(states, cfg)
        if checkpoint_dir is not None:
            _write_checkpoints(states, cfg, checkpoint_dir)
        if stop_after_generation is not None and current >= stop_after_generation and current < cfg.g:
            completed = False
            break

    return _collect(states, cfg, completed)


def _write_checkpoints(states: list[IslandState], cfg: EvoConfig, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for s in states:
        path = checkpoint_path(directory, s.island_id, s.generation)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(checkpoint(s, cfg))
        tmp.replace(path)


def _advance_epoch_processes(states, ctx, step):
    import multiprocessing as mp

    with mp.get_context("spawn").Pool(processes=len(states)) as pool:
        return pool.map(_advance_epoch, [(s, ctx, step) for s in states])


def _collect(states: list[IslandState], cfg: EvoConfig, completed: bool) -> MultiRunResult:
    best_island = max(
        range(len(states)),
        key=lambda i: (states[i].best_by_fitness.fitness, states[i].best_by_fitness.best_cut, -i),
    )
    b = states[best_island].best_by_fitness
    return MultiRunResult(
        islands=tuple(states),
        best_genotype=b.genotype,
        best_fitness=b.fitness,
        best_cut=max(s.best_by_cut.best_cut for s in states),
        best_island=best_island,
        pooled_uniqueness=_pooled_uniqueness(states, cfg.n_pop),
        evaluations=sum(s.evaluations for s in states),
        completed=completed,
    )


def resume_islands(
    g: RegularGraph,
    cfg: EvoConfig,
    islands: int,
    g_f: int,
    checkpoint_dir,
    workers: str = "inline",
    stop_after_generation: int | None = None,
) -> MultiRunResult:
    """Continue an interrupted run from the latest consistent checkpoints."""
    directory = Path(checkpoint_dir)
    states = []
    for i in range(islands):
        candidates = sorted(
            directory.glob(f"island-{i}-gen-*.ckpt"),
            key=lambda p: int(p.stem.rsplit("-", 1)[1]),
        )
        if not candidates:
            raise CheckpointError(f"no checkpoint found for island {i} in {directory}")
        states.append(restore(candidates[-1].read_bytes(), cfg))
    lowest = min(s.generation for s in states)
    for i, s in enumerate(states):
        if s.generation != lowest:
            path = checkpoint_path(directory, i, lowest)
            if not path.exists():
                raise CheckpointError(
                    f"islands out of step and no island-{i} checkpoint at generation {lowest}"
                )
            states[i] = restore(path.read_bytes(), cfg)
    return run_islands(
        g,
        cfg,
        islands=islands,
        g_f=g_f,
        workers=workers,
        checkpoint_dir=checkpoint_dir,
        resume_states=states,
        stop_after_generation=stop_after_generation,
    )
