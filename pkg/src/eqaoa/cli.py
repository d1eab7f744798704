"""Experiment runner: graph sets, arm execution, records, and reports.

Subcommands: ``generate`` writes pinned benchmark graph files, ``run``
executes the configured arms over a graph set and persists one JSON-lines
record per (graph, arm, repetition), ``report`` aggregates records into
CSV summaries, and ``checkpoint-resume`` finishes interrupted island runs
from their checkpoint files.

Records are byte-deterministic: identical config and seeds always
regenerate identical files, so timing goes into a ``.meta`` sidecar
instead of the record itself.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from . import __version__
from .baseline import BaselineConfig, optimize_local
from .evo import EvoConfig, evolve
from .fitness import FitnessConfig, approximation_ratio
from .graph import RegularGraph, generate_regular, max_cut_bruteforce, read_graph, write_graph
from .islands import resume_islands, run_islands
from .rng import derive_seed

OUTPUT_DIR_ENV = "EQAOA_OUTPUT_DIR"

ARMS = ("ea", "islands", "baseline")
_ARM_CODE = {"ea": 0, "islands": 1, "baseline": 2}

RECORD_SCHEMA = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSetConfig:
    dir: str = "graphs"
    sizes: tuple[int, ...] = (4,)
    count: int = 1
    degree: int = 3
    seed: int = 0


@dataclass(frozen=True)
class IslandRunConfig:
    m: int = 2
    g_f: int | str = 5  # integer, or "g/3" for a third of the generations
    workers: str = "inline"
    checkpoints: bool = False

    def resolve_g_f(self, g: int) -> int:
        if isinstance(self.g_f, str):
            if self.g_f.replace(" ", "") != "g/3":
                raise ConfigError(f"g_f must be an integer or 'g/3', got {self.g_f!r}")
            return max(1, g // 3)
        return int(self.g_f)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "results"
    graphs: GraphSetConfig = field(default_factory=GraphSetConfig)
    arms: tuple[str, ...] = ("ea",)
    repetitions: int = 1
    ea: EvoConfig = field(default_factory=EvoConfig)
    islands: IslandRunConfig = field(default_factory=IslandRunConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)


def _build_fitness(doc: dict) -> FitnessConfig:
    return FitnessConfig(
        mode=doc.get("mode", "cvar"),
        alpha=float(doc.get("alpha", 0.15)),
        shots=int(doc.get("shots", 10_000)),
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment file; raises ConfigError with context."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    try:
        graphs_doc = doc.get("graphs", {})
        graphs = GraphSetConfig(
            dir=str(graphs_doc.get("dir", "graphs")),
            sizes=tuple(int(n) for n in graphs_doc.get("sizes", [4])),
            count=int(graphs_doc.get("count", 1)),
            degree=int(graphs_doc.get("degree", 3)),
            seed=int(graphs_doc.get("seed", 0)),
        )
        arms_doc = doc.get("arms", ["ea"])
        arms = tuple(ARMS) if arms_doc == "all" else tuple(str(a) for a in arms_doc)
        for arm in arms:
            if arm not in ARMS:
                raise ConfigError(f"unknown arm {arm!r}; valid: {', '.join(ARMS)} or 'all'")

        ea_doc = dict(doc.get("ea", {}))
        fitness = _build_fitness(ea_doc)
        ea = EvoConfig(
            n_pop=int(ea_doc.get("n_pop", 10)),
            g=int(ea_doc.get("g", 10)),
            p=int(ea_doc.get("p", 2)),
            p_sigma=float(ea_doc.get("p_sigma", 0.2)),
            sigma_min=float(ea_doc.get("sigma_min", 0.1)),
            mu=int(ea_doc.get("mu", 1)),
            tau=ea_doc.get("tau"),
            tau_prime=ea_doc.get("tau_prime"),
            fitness=fitness,
            cache_evaluations=bool(ea_doc.get("cache_evaluations", False)),
        )

        islands_doc = dict(doc.get("islands", {}))
        islands = IslandRunConfig(
            m=int(islands_doc.get("m", 2)),
            g_f=islands_doc.get("g_f", 5),
            workers=str(islands_doc.get("workers", "inline")),
            checkpoints=bool(islands_doc.get("checkpoints", False)),
        )
        if islands.workers not in ("inline", "process"):
            raise ConfigError(f"islands.workers must be 'inline' or 'process', got {islands.workers!r}")
        islands.resolve_g_f(ea.g)  # validate now, before any compute

        baseline_doc = dict(doc.get("baseline", {}))
        baseline = BaselineConfig(
            iterations=int(baseline_doc.get("iterations", 10)),
            restarts=int(baseline_doc.get("restarts", 1)),
            p=int(baseline_doc.get("p", ea.p)),
            rho_begin=float(baseline_doc.get("rho_begin", 1.0)),
            # both arms score with the same fitness unless explicitly split
            fitness=FitnessConfig(
                mode=str(baseline_doc.get("mode", fitness.mode)),
                alpha=float(baseline_doc.get("alpha", fitness.alpha)),
                shots=int(baseline_doc.get("shots", fitness.shots)),
            ),
        )

        cfg = ExperimentConfig(
            seed=int(doc.get("seed", 0)),
            output_dir=str(doc.get("output_dir", "results")),
            graphs=graphs,
            arms=arms,
            repetitions=int(doc.get("repetitions", 1)),
            ea=ea,
            islands=islands,
            baseline=baseline,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if cfg.repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, got {cfg.repetitions}")
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig) -> str:
    """Digest of the experiment definition.

    Deployment choices (filesystem locations, worker mode, checkpointing)
    are excluded: they cannot change results, and records must stay
    byte-identical no matter where or how a run is executed.
    """
    doc = asdict(cfg)
    doc.pop("output_dir")
    doc["graphs"].pop("dir")
    doc["islands"].pop("workers")
    doc["islands"].pop("checkpoints")
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()[:16]


def graph_filename(n: int, index: int) -> str:
    return f"n{n:02d}_{index:02d}.graph"


def record_filename(graph_file: str, arm: str, repetition: int) -> str:
    return f"{Path(graph_file).stem}__{arm}__rep{repetition:02d}.jsonl"


def _graph_seed(set_seed: int, n: int, index: int) -> int:
    return derive_seed(set_seed, n, index)


def cmd_generate(sizes, count: int, seed: int, out_dir, degree: int = 3, force: bool = False) -> list[Path]:
    """Write one canonical edge-list file per (size, index)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for n in sizes:
        for idx in range(count):
            path = out / graph_filename(n, idx)
            if path.exists() and not force:
                raise FileExistsError(f"{path} exists; pass --force to overwrite")
            g = generate_regular(n, degree, _graph_seed(seed, n, idx))
            write_graph(g, path)
            written.append(path)
    return written


def _load_graph_set(cfg: ExperimentConfig) -> list[tuple[str, RegularGraph]]:
    """Graph files for the configured set, generating any that are missing."""
    out = []
    gdir = Path(cfg.graphs.dir)
    gdir.mkdir(parents=True, exist_ok=True)
    for n in cfg.graphs.sizes:
        for idx in range(cfg.graphs.count):
            name = graph_filename(n, idx)
            path = gdir / name
            if path.exists():
                g = read_graph(path)
            else:
                g = generate_regular(n, cfg.graphs.degree, _graph_seed(cfg.graphs.seed, n, idx))
                write_graph(g, path)
            out.append((name, g))
    return out


def _cell_seed(cfg: ExperimentConfig, g: RegularGraph, arm: str, rep: int) -> int:
    return derive_seed(cfg.seed, g.seed, _ARM_CODE[arm], rep)


def _meta_line(cfg: ExperimentConfig, graph_file: str, g: RegularGraph, arm: str, rep: int,
               seed: int, optimal: int) -> dict:
    fitness = cfg.baseline.fitness if arm == "baseline" else cfg.ea.fitness
    return {
        "kind": "meta",
        "schema": RECORD_SCHEMA,
        "software_version": __version__,
        "config_hash": config_hash(cfg),
        "graph_file": graph_file,
        "n": g.n,
        "degree": g.degree,
        "graph_seed": g.seed,
        "arm": arm,
        "repetition": rep,
        "seed": seed,
        "fitness_mode": fitness.mode,
        "alpha": fitness.alpha,
        "shots": fitness.shots,
        "optimizer": "cobyla" if arm == "baseline" else "evolutionary",
        "optimal_cut": optimal,
    }


def _generation_lines(island_id: int, history) -> list[dict]:
    lines = []
    for h in history:
        lines.append(
            {
                "kind": "generation",
                "island": island_id,
                "generation": h.generation,
                "ids": list(h.ids),
                "fitness": list(h.fitness),
                "best_cut": list(h.best_cut),
                "uniqueness_fitness": h.uniqueness_fitness,
                "uniqueness_beta1": h.uniqueness_beta1,
                "elite_id": h.elite_id,
                "best_ever_cut": h.best_ever_cut,
                "best_ever_fitness": h.best_ever_fitness,
                "evaluations": h.evaluations,
            }
        )
    return lines


def _summary_line(arm: str, best_fitness: float, best_cut: int, optimal: int,
                  evaluations: int, angles, sigmas) -> dict:
    return {
        "kind": "summary",
        "arm": arm,
        "best_fitness": best_fitness,
        "best_cut": best_cut,
        "approx_ratio": approximation_ratio(best_fitness, optimal),
        "best_cut_ratio": approximation_ratio(best_cut, optimal),
        "evaluations": evaluations,
        "best_angles": [float(a) for a in angles],
        "best_sigmas": [float(s) for s in sigmas],
    }


def _islands_lines(result, optimal: int) -> list[dict]:
    lines = []
    for st in result.islands:
        lines += _generation_lines(st.island_id, st.history)
        for ev in st.migration_log:
            lines.append(
                {
                    "kind": "migration",
                    "island": st.island_id,
                    "at_generation": ev.at_generation,
                    "from_island": ev.from_island,
                    "to_island": ev.to_island,
                    "best_cut": ev.best_cut,
                    "replaced_id": ev.replaced_id,
                    "replaced_best_cut": ev.replaced_best_cut,
                    "angles": list(ev.angles),
                    "sigmas": list(ev.sigmas),
                }
            )
    for row in result.pooled_uniqueness:
        lines.append({"kind": "pooled_uniqueness", **row})
    lines.append(
        _summary_line("islands", result.best_fitness, result.best_cut, optimal,
                      result.evaluations, result.best_genotype.angles,
                      result.best_genotype.sigmas)
    )
    return lines


def _run_cell(cfg: ExperimentConfig, graph_file: str, g: RegularGraph, arm: str, rep: int,
              optimal: int, out_dir: Path, stop_after: int | None) -> bool:
    """Execute one (graph, arm, repetition) cell; returns False if stopped early."""
    seed = _cell_seed(cfg, g, arm, rep)
    lines = [_meta_line(cfg, graph_file, g, arm, rep, seed, optimal)]

    if arm == "ea":
        result = evolve(g, replace(cfg.ea, seed=seed))
        lines += _generation_lines(0, result.history)
        lines.append(
            _summary_line(arm, result.best_fitness, result.best_cut, optimal,
                          result.evaluations, result.best_genotype.angles,
                          result.best_genotype.sigmas)
        )
    elif arm == "islands":
        g_f = cfg.islands.resolve_g_f(cfg.ea.g)
        ckpt_dir = None
        if cfg.islands.checkpoints or stop_after is not None:
            ckpt_dir = out_dir / "checkpoints" / record_filename(graph_file, arm, rep).removesuffix(".jsonl")
        result = run_islands(
            g,
            replace(cfg.ea, seed=seed),
            islands=cfg.islands.m,
            g_f=g_f,
            workers=cfg.islands.workers,
            checkpoint_dir=ckpt_dir,
            stop_after_generation=stop_after,
        )
        if not result.completed:
            return False
        lines += _islands_lines(result, optimal)
    else:  # baseline: one independent descent per repetition
        result = optimize_local(g, replace(cfg.baseline, seed=seed))
        for trace in result.traces:
            for pt in trace.points:
                lines.append(
                    {
                        "kind": "iteration",
                        "restart": trace.restart,
                        "iteration": pt.iteration,
                        "fitness": pt.fitness,
                        "best_cut": pt.best_cut,
                        "best_fitness_so_far": pt.best_fitness_so_far,
                        "best_cut_so_far": pt.best_cut_so_far,
                    }
                )
        lines.append(
            _summary_line(arm, result.best_fitness, result.best_cut, optimal,
                          result.evaluations, result.best_angles,
                          [0.0] * len(result.best_angles))
        )

    _write_record(out_dir / record_filename(graph_file, arm, rep), lines)
    return True


def _write_record(path: Path, lines: list[dict]) -> None:
    body = "".join(canonical_json(line) + "\n" for line in lines)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(body, encoding="utf-8")
    tmp.replace(path)


def _write_sidecar(path: Path, wall_time: float) -> None:
    sidecar = path.with_suffix(".meta")
    sidecar.write_text(canonical_json({"wall_time_s": wall_time}) + "\n", encoding="utf-8")


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, cfg.output_dir))


def cmd_run(cfg: ExperimentConfig, stop_after: int | None = None, resume: bool = False) -> int:
    """Execute all configured cells. Returns the number of failed cells."""
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    graph_set = _load_graph_set(cfg)
    optima = {}
    failures = 0
    for graph_file, g in graph_set:
        if graph_file not in optima:
            optima[graph_file] = max_cut_bruteforce(g)[0]
        for arm in cfg.arms:
            for rep in range(cfg.repetitions):
                record = out / record_filename(graph_file, arm, rep)
                if resume and record.exists():
                    continue
                t0 = time.perf_counter()
                try:
                    if resume and arm == "islands":
                        done = _resume_cell(cfg, graph_file, g, rep, optima[graph_file], out, stop_after)
                    else:
                        done = _run_cell(cfg, graph_file, g, arm, rep, optima[graph_file], out, stop_after)
                except Exception as exc:  # noqa: BLE001 - keep running remaining cells
                    failures += 1
                    print(f"error: {graph_file} {arm} rep{rep}: {exc}", file=sys.stderr)
                    continue
                if done:
                    _write_sidecar(record, time.perf_counter() - t0)
                else:
                    print(f"stopped early: {graph_file} {arm} rep{rep} (checkpoints kept)")
    return failures


def _resume_cell(cfg: ExperimentConfig, graph_file: str, g: RegularGraph, rep: int,
                 optimal: int, out_dir: Path, stop_after: int | None) -> bool:
    arm = "islands"
    seed = _cell_seed(cfg, g, arm, rep)
    ckpt_dir = out_dir / "checkpoints" / record_filename(graph_file, arm, rep).removesuffix(".jsonl")
    if not ckpt_dir.exists():
        return _run_cell(cfg, graph_file, g, arm, rep, optimal, out_dir, stop_after)
    g_f = cfg.islands.resolve_g_f(cfg.ea.g)
    result = resume_islands(
        g,
        replace(cfg.ea, seed=seed),
        islands=cfg.islands.m,
        g_f=g_f,
        checkpoint_dir=ckpt_dir,
        workers=cfg.islands.workers,
        stop_after_generation=stop_after,
    )
    if not result.completed:
        return False
    lines = [_meta_line(cfg, graph_file, g, arm, rep, seed, optimal)]
    lines += _islands_lines(result, optimal)
    _write_record(out_dir / record_filename(graph_file, arm, rep), lines)
    return True


def _read_records(records_dir) -> list[tuple[str, dict, list[dict]]]:
    paths = sorted(Path(records_dir).glob("*.jsonl"))
    out = []
    for path in paths:
        lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
        if not lines or lines[0].get("kind") != "meta":
            raise ValueError(f"{path}: not a run record (missing meta line)")
        out.append((path.name, lines[0], lines[1:]))
    return out


def cmd_report(records_dir, out_dir) -> tuple[Path, Path]:
    """Aggregate records into summary and uniqueness CSV tables."""
    records = _read_records(records_dir)
    if not records:
        raise FileNotFoundError(f"no .jsonl records in {records_dir}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    groups: dict[tuple, list[dict]] = {}
    for _, meta, lines in records:
        summary = next(l for l in lines if l["kind"] == "summary")
        key = (meta["n"], meta["arm"], meta["fitness_mode"])
        groups.setdefault(key, []).append(summary)

    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "arm", "fitness_mode", "runs",
                    "mean_ratio", "std_ratio", "min_ratio", "max_ratio"])
        for key in sorted(groups):
            ratios = [s["approx_ratio"] for s in groups[key]]
            mean = sum(ratios) / len(ratios)
            var = sum((r - mean) ** 2 for r in ratios) / len(ratios)
            w.writerow(
                [key[0], key[1], key[2], len(ratios),
                 f"{mean:.6f}", f"{var ** 0.5:.6f}",
                 f"{min(ratios):.6f}", f"{max(ratios):.6f}"]
            )

    uniq_path = out / "uniqueness.csv"
    with open(uniq_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["record", "arm", "island", "generation",
                    "uniqueness_fitness", "uniqueness_beta1"])
        for name, meta, lines in records:
            for line in lines:
                if line["kind"] == "generation":
                    w.writerow(
                        [name, meta["arm"], line["island"], line["generation"],
                         f"{line['uniqueness_fitness']:.6f}",
                         f"{line['uniqueness_beta1']:.6f}"]
                    )
    return summary_path, uniq_path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqaoa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write benchmark graph files")
    gen.add_argument("--sizes", type=int, nargs="+", required=True)
    gen.add_argument("--count", type=int, default=1, help="graphs per size")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--degree", type=int, default=3)
    gen.add_argument("--out", default="graphs")
    gen.add_argument("--force", action="store_true", help="overwrite existing files")

    run = sub.add_parser("run", help="execute the configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override the config's global seed")
    run.add_argument("--output-dir", default=None, help="override the config's output directory")
    run.add_argument("--arms", nargs="+", default=None, choices=ARMS, help="override the arm selection")
    run.add_argument("--repetitions", type=int, default=None)
    run.add_argument("--stop-after", type=int, default=None,
                     help="stop island runs at this generation boundary (checkpoints kept)")

    rep = sub.add_parser("report", help="summarize records into CSV")
    rep.add_argument("--records", required=True)
    rep.add_argument("--out", default=None, help="defaults to the records directory")

    res = sub.add_parser("checkpoint-resume", help="finish interrupted island runs")
    res.add_argument("--config", required=True)
    res.add_argument("--stop-after", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            try:
                written = cmd_generate(args.sizes, args.count, args.seed, args.out,
                                       degree=args.degree, force=args.force)
            except (ValueError, FileExistsError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 1
            for path in written:
                print(path)
            return 0

        if args.command in ("run", "checkpoint-resume"):
            try:
                cfg = load_config(args.config)
                if args.command == "run":
                    if args.seed is not None:
                        cfg = replace(cfg, seed=args.seed)
                    if args.output_dir is not None:
                        cfg = replace(cfg, output_dir=args.output_dir)
                    if args.arms is not None:
                        cfg = replace(cfg, arms=tuple(args.arms))
                    if args.repetitions is not None:
                        cfg = replace(cfg, repetitions=args.repetitions)
                        if cfg.repetitions < 1:
                            raise ConfigError("repetitions must be >= 1")
            except ConfigError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return 1
            failures = cmd_run(cfg, stop_after=args.stop_after,
                               resume=args.command == "checkpoint-resume")
            if failures:
                print(f"{failures} cell(s) failed", file=sys.stderr)
                return 2
            return 0

        if args.command == "report":
            try:
                summary, uniq = cmd_report(args.records, args.out or args.records)
            except (FileNotFoundError, ValueError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 1
            print(summary)
            print(uniq)
            return 0
    except KeyboardInterrupt:
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
