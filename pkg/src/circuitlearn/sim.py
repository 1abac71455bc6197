"""Logic simulation oracles: exact (exhaustive) and sampled (Monte-Carlo).

Every ground-truth quantity comes from here: per-node one-probability
under the joint input distribution, the independence approximation of it,
their difference, pairwise truth-table similarity, and transition rates
for sequential circuits.

Truth tables are bit-packed, 64 patterns per word, and evaluated level by
level with word-wide boolean ops.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import CircuitGraph, LevelSchedule, OperatorKind

EXHAUSTIVE_MAX_INPUTS = 20
DEFAULT_MC_PATTERNS = 2**15

_WORD = 64


class TooManyInputs(ValueError):
    pass


class ArityError(ValueError):
    pass


class NotSequential(ValueError):
    pass


@dataclass(frozen=True)
class Exhaustive:
    """Enumerate all 2^k assignments of the stochastic (PI) inputs."""

    max_inputs: int = EXHAUSTIVE_MAX_INPUTS


@dataclass(frozen=True)
class MonteCarlo:
    """Sample input patterns from the per-PI Bernoulli distributions."""

    seed: int
    n_patterns: int = DEFAULT_MC_PATTERNS


PatternSource = Exhaustive | MonteCarlo


@dataclass(frozen=True)
class TruthTableSet:
    """Per-node output bit-vectors under a shared pattern set.

    ``words[v, w]`` holds patterns ``64w .. 64w+63`` of node v, bit t%64 of
    the word being pattern t (little-endian).  Trailing bits past
    ``n_patterns`` are kept zero.
    """

    n_patterns: int
    words: np.ndarray  # uint64 [n_nodes, n_words]
    stochastic_inputs: tuple[int, ...]  # PI node ids, enumeration order
    source: PatternSource

    def column(self, v: int) -> np.ndarray:
        """Unpacked 0/1 vector of node v over all patterns."""
        bits = np.unpackbits(self.words[v].view(np.uint8), bitorder="little")
        return bits[: self.n_patterns]

    def popcount(self, v: int) -> int:
        return int(np.bitwise_count(self.words[v]).sum())

    def hamming(self, i: int, j: int) -> int:
        return int(np.bitwise_count(self.words[i] ^ self.words[j]).sum())


def _pack(bits: np.ndarray, n_words: int) -> np.ndarray:
    packed = np.packbits(bits.astype(np.uint8), bitorder="little")
    padded = np.zeros(n_words * 8, dtype=np.uint8)
    padded[: packed.size] = packed
    return padded.view(np.uint64)


def simulate(
    graph: CircuitGraph, schedule: LevelSchedule, source: PatternSource
) -> TruthTableSet:
    """Evaluate every node over the pattern set, level by level.

    Pseudo-PIs contribute their (deterministic) initial state; only real
    PIs are stochastic.  Exhaustive enumeration orders patterns so that the
    first PI (by node id) is the most significant bit of the pattern index.
    """
    pis = graph.pi_ids
    k = len(pis)
    if isinstance(source, Exhaustive):
        if k > source.max_inputs:
            raise TooManyInputs(
                f"{k} stochastic inputs exceed exhaustive cap {source.max_inputs}"
            )
        n_patterns = 1 << k
    else:
        n_patterns = source.n_patterns
    n_words = max(1, (n_patterns + _WORD - 1) // _WORD)
    words = np.zeros((graph.n_nodes, n_words), dtype=np.uint64)
    tail_mask = np.zeros(n_words, dtype=np.uint64)
    full, rem = divmod(n_patterns, _WORD)
    tail_mask[:full] = np.uint64(0xFFFFFFFFFFFFFFFF)
    if rem:
        tail_mask[full] = np.uint64((1 << rem) - 1)

    if isinstance(source, Exhaustive):
        t = np.arange(n_patterns, dtype=np.uint64)
        for j, v in enumerate(pis):
            shift = np.uint64(k - 1 - j)
            words[v] = _pack((t >> shift) & np.uint64(1), n_words)
    else:
        rng = np.random.default_rng(source.seed)
        for v in pis:
            bits = rng.random(n_patterns) < graph.pi_params[v]
            words[v] = _pack(bits, n_words)

    for v in graph.pseudo_pi_ids:
        if graph.latch_init.get(v, 0):
            words[v] = tail_mask

    for level in schedule.levels[1:]:
        for v in level:
            kind = graph.kinds[v]
            ins = graph.inputs_of[v]
            if kind is OperatorKind.AND2:
                words[v] = words[ins[0]] & words[ins[1]]
            elif kind is OperatorKind.NOT:
                words[v] = ~words[ins[0]] & tail_mask
            elif kind is OperatorKind.MUX:
                s, a, b = ins
                words[v] = (words[s] & words[b]) | (words[a] & ~words[s])
            else:
                raise ArityError(f"node {v}: {kind.value} at level > 0")
    words.setflags(write=False)
    return TruthTableSet(
        n_patterns=n_patterns,
        words=words,
        stochastic_inputs=pis,
        source=source,
    )


def _exhaustive_weights(graph: CircuitGraph, pis: Sequence[int]) -> np.ndarray:
    """Pattern weights prod_i p_i^x_i (1-p_i)^(1-x_i), MSB-first ordering."""
    w = np.ones(1, dtype=np.float64)
    for v in pis:
        p = graph.pi_params[v]
        w = np.kron(w, np.array([1.0 - p, p]))
    return w


def global_function(graph: CircuitGraph, tts: TruthTableSet) -> np.ndarray:
    """Per-node one-probability under the joint input distribution.

    Monte-Carlo tables already sample the distribution, so the estimate is
    popcount/P.  Exhaustive tables enumerate uniformly and weight each
    pattern by its probability; with all p=0.5 this reduces to the exact
    dyadic popcount/P.
    """
    n = graph.n_nodes
    probs = np.empty(n, dtype=np.float64)
    uniform = all(graph.pi_params[v] == 0.5 for v in tts.stochastic_inputs)
    if isinstance(tts.source, MonteCarlo) or uniform:
        for v in range(n):
            probs[v] = tts.popcount(v) / tts.n_patterns
    else:
        w = _exhaustive_weights(graph, tts.stochastic_inputs)
        for v in range(n):
            probs[v] = float(w @ tts.column(v))
    return probs


def local_function(
    kind: OperatorKind, input_probs: Sequence[float], value: float | None = None
) -> float:
    """Operator applied to input one-probabilities assuming independence.

    Arity-0 kinds take their probability from ``value`` (PI parameter or
    pseudo-PI initial state); CONST0 is always 0.
    """
    if len(input_probs) != kind.arity:
        raise ArityError(
            f"{kind.value} expects {kind.arity} input probabilities,"
            f" got {len(input_probs)}"
        )
    if kind is OperatorKind.AND2:
        return input_probs[0] * input_probs[1]
    if kind is OperatorKind.NOT:
        return 1.0 - input_probs[0]
    if kind is OperatorKind.MUX:
        ps, pa, pb = input_probs
        return ps * pb + (1.0 - ps) * pa
    if kind is OperatorKind.CONST0:
        return 0.0
    if value is None:
        raise ArityError(f"{kind.value} needs an input value")
    return float(value)


@dataclass(frozen=True)
class NodeFunctionLabels:
    """Per-node label channels; shift == global_prob - local_prob exactly."""

    global_prob: np.ndarray
    local_prob: np.ndarray
    shift: np.ndarray


def function_shift_labels(
    graph: CircuitGraph, schedule: LevelSchedule, source: PatternSource
) -> NodeFunctionLabels:
    """Exact global/local/shift channels for every node.

    The local channel applies each operator to the *true* global
    probabilities of its predecessors, mirroring how reconstruction
    consumes already-estimated values downstream.
    """
    tts = simulate(graph, schedule, source)
    global_prob = global_function(graph, tts)
    local_prob = np.empty_like(global_prob)
    for v in range(graph.n_nodes):
        kind = graph.kinds[v]
        if kind is OperatorKind.PI:
            local_prob[v] = graph.pi_params[v]
        elif kind is OperatorKind.PSEUDO_PI:
            local_prob[v] = float(graph.latch_init.get(v, 0))
        else:
            local_prob[v] = local_function(
                kind, [global_prob[u] for u in graph.inputs_of[v]]
            )
    shift = global_prob - local_prob
    return NodeFunctionLabels(global_prob=global_prob, local_prob=local_prob, shift=shift)


def similarity_labels(
    tts: TruthTableSet, pairs: Sequence[tuple[int, int]]
) -> list[float]:
    """1 - normalized Hamming distance between node truth tables."""
    return [1.0 - tts.hamming(i, j) / tts.n_patterns for i, j in pairs]


def sequential_simulate(graph: CircuitGraph, pi_streams: np.ndarray) -> np.ndarray:
    """Multi-cycle simulation; returns values [n_nodes, n_cycles].

    ``pi_streams[j]`` is the 0/1 stream for the j-th PI (id order).  Each
    pseudo-PI starts at its initial state and thereafter takes its driver's
    value from the previous cycle.
    """
    from .graph import compute_levels

    pis = graph.pi_ids
    if pi_streams.shape[0] != len(pis):
        raise ArityError(
            f"expected {len(pis)} PI streams, got {pi_streams.shape[0]}"
        )
    n_cycles = pi_streams.shape[1]
    schedule = compute_levels(graph)
    values = np.zeros((graph.n_nodes, n_cycles), dtype=np.uint8)
    state = {v: graph.latch_init.get(v, 0) for v in graph.pseudo_pi_ids}
    cur = np.zeros(graph.n_nodes, dtype=np.uint8)
    for t in range(n_cycles):
        for j, v in enumerate(pis):
            cur[v] = pi_streams[j, t]
        for v in graph.pseudo_pi_ids:
            cur[v] = state[v]
        for level in schedule.levels[1:]:
            for v in level:
                kind = graph.kinds[v]
                ins = graph.inputs_of[v]
                if kind is OperatorKind.AND2:
                    cur[v] = cur[ins[0]] & cur[ins[1]]
                elif kind is OperatorKind.NOT:
                    cur[v] = 1 - cur[ins[0]]
                elif kind is OperatorKind.MUX:
                    s, a, b = ins
                    cur[v] = (cur[s] & cur[b]) | (cur[a] & (1 - cur[s]))
        values[:, t] = cur
        for v, drv in graph.latch_map.items():
            state[v] = int(cur[drv])
    return values


def transition_probs_from_values(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Count 0->1 / 1->0 flips across consecutive cycles, normalized by the
    number of cycle boundaries so both rates lie in [0, 1]."""
    n_cycles = values.shape[1]
    if n_cycles < 2:
        raise ValueError("need at least 2 cycles to count transitions")
    prev = values[:, :-1]
    cur = values[:, 1:]
    rising = ((prev == 0) & (cur == 1)).sum(axis=1)
    falling = ((prev == 1) & (cur == 0)).sum(axis=1)
    boundaries = n_cycles - 1
    return rising / boundaries, falling / boundaries


def transition_labels(
    graph: CircuitGraph, n_cycles: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (P_0to1, P_1to0) under random per-cycle PI streams."""
    if not graph.latch_map:
        raise NotSequential("transition labels need a sequential circuit")
    if n_cycles < 2:
        raise ValueError("n_cycles must be >= 2")
    rng = np.random.default_rng(seed)
    pis = graph.pi_ids
    streams = np.empty((len(pis), n_cycles), dtype=np.uint8)
    for j, v in enumerate(pis):
        streams[j] = rng.random(n_cycles) < graph.pi_params[v]
    values = sequential_simulate(graph, streams)
    return transition_probs_from_values(values)
