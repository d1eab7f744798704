"""Random regular graphs, cut evaluation, and an exhaustive Max-Cut oracle.

A cut assignment is an n-bit integer word: bit i is node i's partition,
least-significant bit is node 0. The same convention is used for
statevector basis indices in :mod:`eqaoa.qsim`, so bitstrings sampled from
the circuit are directly valid cut assignments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Exhaustive enumeration is capped at the largest benchmarked instance size;
# beyond this the 2^n scan is no longer a sane ground-truth source.
ENUMERATION_BOUND = 26

GENERATION_RETRY_BUDGET = 1000

_BRUTEFORCE_CHUNK = 1 << 20


class GraphGenerationError(RuntimeError):
    """Stub pairing failed to produce a simple graph within the retry budget."""


@dataclass(frozen=True)
class RegularGraph:
    """Undirected d-regular graph with a canonically ordered edge list."""

    n: int
    degree: int
    edges: tuple[tuple[int, int], ...]
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be positive, got {self.n}")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i}, {j}) not canonical (need 0 <= i < j < n)")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        if tuple(sorted(self.edges)) != tuple(self.edges):
            raise ValueError("edge list not sorted lexicographically")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        counts = [0] * self.n
        for i, j in self.edges:
            counts[i] += 1
            counts[j] += 1
        return counts

    def validate_regular(self) -> None:
        """Check the full d-regularity contract, not just edge canonicality."""
        bad = [v for v, d in enumerate(self.degrees()) if d != self.degree]
        if bad:
            raise ValueError(f"nodes {bad} do not have degree {self.degree}")


def generate_regular(n: int, degree: int, seed: int) -> RegularGraph:
    """Sample a random simple d-regular graph via stub pairing.

    Each node gets ``degree`` stubs; a uniform random perfect matching of the
    stubs is drawn and rejected outright if it contains a self-loop or a
    repeated edge. Identical (n, degree, seed) always returns the identical
    edge list.
    """
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if n <= degree:
        raise ValueError(f"need n > degree, got n={n}, degree={degree}")
    if (n * degree) % 2 != 0:
        raise ValueError(f"n * degree must be even, got {n} * {degree}")

    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), degree)
    for _ in range(GENERATION_RETRY_BUDGET):
        order = rng.permutation(stubs)
        pairs = order.reshape(-1, 2)
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        if np.any(lo == hi):
            continue
        edges = sorted(zip(lo.tolist(), hi.tolist()))
        if any(a == b for a, b in zip(edges, edges[1:])):
            continue
        return RegularGraph(n=n, degree=degree, edges=tuple(edges), seed=seed)
    raise GraphGenerationError(
        f"no simple {degree}-regular graph found for n={n}, seed={seed} "
        f"within {GENERATION_RETRY_BUDGET} pairing attempts"
    )


def cut_value(g: RegularGraph, x: int) -> int:
    """Number of edges of ``g`` crossing the cut encoded by word ``x``."""
    if not 0 <= x < (1 << g.n):
        raise ValueError(f"assignment word {x} out of range for n={g.n}")
    return sum(((x >> i) ^ (x >> j)) & 1 for i, j in g.edges)


def cut_values(g: RegularGraph, words: np.ndarray) -> np.ndarray:
    """Vectorized cut values for an integer array of assignment words."""
    w = np.asarray(words, dtype=np.int64)
    acc = np.zeros(w.shape, dtype=np.int64)
    for i, j in g.edges:
        acc += ((w >> i) ^ (w >> j)) & 1
    return acc


def max_cut_bruteforce(g: RegularGraph) -> tuple[int, set[int]]:
    """Exact Max-Cut value and the set of all optimal assignments.

    Scans all 2^n words in vectorized chunks; only intended for
    n <= ENUMERATION_BOUND.
    """
    if g.n > ENUMERATION_BOUND:
        raise ValueError(f"n={g.n} above enumeration bound {ENUMERATION_BOUND}")
    best = -1
    witnesses: list[int] = []
    total = 1 << g.n
    for start in range(0, total, _BRUTEFORCE_CHUNK):
        words = np.arange(start, min(start + _BRUTEFORCE_CHUNK, total), dtype=np.int64)
        cuts = cut_values(g, words)
        chunk_best = int(cuts.max())
        if chunk_best > best:
            best = chunk_best
            witnesses = []
        if chunk_best == best:
            witnesses.extend(words[cuts == best].tolist())
    return best, set(witnesses)


def write_graph(g: RegularGraph, path) -> None:
    """Write the canonical plain-text edge list: header 'n degree seed', then 'i j' lines."""
    lines = [f"{g.n} {g.degree} {g.seed}"]
    lines.extend(f"{i} {j}" for i, j in g.edges)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path) -> RegularGraph:
    with open(path, "r", encoding="utf-8") as fh:
        tokens = [line.split() for line in fh if line.strip()]
    if not tokens or len(tokens[0]) != 3:
        raise ValueError(f"{path}: expected header 'n degree seed'")
    n, degree, seed = (int(t) for t in tokens[0])
    edges = []
    for row in tokens[1:]:
        if len(row) != 2:
            raise ValueError(f"{path}: malformed edge line {row!r}")
        edges.append((int(row[0]), int(row[1])))
    g = RegularGraph(n=n, degree=degree, edges=tuple(edges), seed=seed)
    g.validate_regular()
    return g
