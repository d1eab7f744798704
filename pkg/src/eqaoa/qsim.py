"""Exact statevector simulation of the Max-Cut QAOA circuit.

The circuit is Hadamards on every qubit, then p repetitions of a cost
layer exp(-i*gamma*sum_E Z_i Z_j) followed by a mixer layer
exp(-i*beta*X_q) on every qubit. The cost layer is applied as a
precomputed integer diagonal (all ZZ factors commute), which turns one
layer into a single phase-table lookup pass instead of |E| two-qubit
gates. Basis index bit i is qubit i, least-significant bit first,
matching the cut-assignment convention in :mod:`eqaoa.graph`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graph import RegularGraph

# 2^26 double-precision amplitudes is ~1 GiB; larger states are out of scope.
STATEVECTOR_QUBIT_LIMIT = 26

_DIAG_CHUNK = 1 << 20


@dataclass
class StateVector:
    """2^n complex amplitudes; basis index bit i is qubit i (LSB first)."""

    amplitudes: np.ndarray
    n: int

    def norm_sq(self) -> float:
        a = self.amplitudes
        return float(np.sum(a.real * a.real + a.imag * a.imag))

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return a.real * a.real + a.imag * a.imag


@dataclass(frozen=True)
class CostDiagonal:
    """Eigenvalues of sum_E Z_i Z_j on each basis state: zz_sums[x] = |E| - 2*cut(x)."""

    zz_sums: np.ndarray  # int16, length 2^n
    n: int
    edge_count: int


@dataclass
class ShotHistogram:
    """Measurement counts: integer bitstring word -> number of shots."""

    counts: dict[int, int]
    shots: int
    n: int


@dataclass
class OpCounter:
    """Tallies amplitude updates so evaluation cost is auditable."""

    amplitude_ops: int = 0


def _check_qubit_count(n: int) -> None:
    if n > STATEVECTOR_QUBIT_LIMIT:
        raise ValueError(f"n={n} exceeds statevector limit of {STATEVECTOR_QUBIT_LIMIT} qubits")
    if n < 1:
        raise ValueError(f"need at least one qubit, got n={n}")


def uniform_state(n: int) -> StateVector:
    """State after the initial Hadamard wall: every amplitude 2^(-n/2)."""
    _check_qubit_count(n)
    amps = np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)
    return StateVector(amplitudes=amps, n=n)


@njit(cache=True)
def _zz_fill(out, start, edges_i, edges_j):
    for k in range(out.shape[0]):
        x = start + k
        acc = 0
        for e in range(edges_i.shape[0]):
            if ((x >> edges_i[e]) ^ (x >> edges_j[e])) & 1:
                acc -= 1
            else:
                acc += 1
        out[k] = acc


def build_cost_diagonal(g: RegularGraph) -> CostDiagonal:
    _check_qubit_count(g.n)
    total = 1 << g.n
    zz = np.empty(total, dtype=np.int16)
    ei = np.array([i for i, _ in g.edges], dtype=np.int64)
    ej = np.array([j for _, j in g.edges], dtype=np.int64)
    for start in range(0, total, _DIAG_CHUNK):
        stop = min(start + _DIAG_CHUNK, total)
        _zz_fill(zz[start:stop], start, ei, ej)
    return CostDiagonal(zz_sums=zz, n=g.n, edge_count=g.edge_count)


@njit(cache=True)
def _phase_apply(amps, zz, table, offset):
    for x in range(amps.shape[0]):
        amps[x] *= table[zz[x] + offset]


@njit(cache=True)
def _rx_all_qubits(amps, n, c, js):
    # One in-place pass per qubit over index pairs differing in that bit.
    for q in range(n):
        step = 1 << q
        block = step << 1
        for base in range(0, amps.shape[0], block):
            for off in range(step):
                i0 = base + off
                i1 = i0 + step
                a = amps[i0]
                b = amps[i1]
                amps[i0] = c * a + js * b
                amps[i1] = js * a + c * b


def apply_cost_layer(
    s: StateVector, gamma: float, d: CostDiagonal, counter: OpCounter | None = None
) -> StateVector:
    """Multiply amplitude[x] by exp(-i*gamma*zz_sums[x]), in place."""
    if d.n != s.n or d.zz_sums.shape[0] != s.amplitudes.shape[0]:
        raise ValueError(f"cost diagonal for n={d.n} does not match state with n={s.n}")
    # zz_sums only takes values in [-|E|, |E|]; a phase table beats 2^n exponentials.
    table = np.exp(-1j * gamma * np.arange(-d.edge_count, d.edge_count + 1))
    _phase_apply(s.amplitudes, d.zz_sums, table, d.edge_count)
    if counter is not None:
        counter.amplitude_ops += s.amplitudes.shape[0]
    return s


def apply_mixer_layer(s: StateVector, beta: float, counter: OpCounter | None = None) -> StateVector:
    """Apply exp(-i*beta*X) to every qubit, in place."""
    c = math.cos(beta)
    js = -1j * math.sin(beta)
    _rx_all_qubits(s.amplitudes, s.n, c, js)
    if counter is not None:
        counter.amplitude_ops += s.n * s.amplitudes.shape[0]
    return s


def run_qaoa(
    g: RegularGraph,
    params: np.ndarray | list[float],
    p: int,
    diag: CostDiagonal | None = None,
    counter: OpCounter | None = None,
) -> StateVector:
    """Run the p-layer circuit with interleaved angles [beta_1, gamma_1, ...].

    Within each layer the cost unitary acts before the mixer. Passing a
    precomputed ``diag`` avoids rebuilding the diagonal per evaluation.
    """
    params = np.asarray(params, dtype=np.float64)
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    if params.shape != (2 * p,):
        raise ValueError(f"expected {2 * p} angles for p={p}, got shape {params.shape}")
    if diag is None:
        diag = build_cost_diagonal(g)
    s = uniform_state(g.n)
    if counter is not None:
        counter.amplitude_ops += s.amplitudes.shape[0]
    for layer in range(p):
        beta, gamma = params[2 * layer], params[2 * layer + 1]
        apply_cost_layer(s, gamma, diag, counter)
        apply_mixer_layer(s, beta, counter)
    return s


def expected_amplitude_ops(n: int, p: int) -> int:
    """Amplitude updates one evaluation must cost: (1 + p*(1 + n)) * 2^n."""
    return (1 + p * (1 + n)) * (1 << n)


def sample(s: StateVector, shots: int, rng: np.random.Generator) -> ShotHistogram:
    """Draw measurement shots from |amplitude|^2 via inverse-CDF lookup."""
    if shots <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    cdf = np.cumsum(s.probabilities())
    u = rng.random(shots) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, cdf.shape[0] - 1)
    words, counts = np.unique(idx, return_counts=True)
    return ShotHistogram(
        counts={int(w): int(c) for w, c in zip(words, counts)},
        shots=shots,
        n=s.n,
    )
