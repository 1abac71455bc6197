"""Circuit graph data model: typed operator nodes, validation, levelization.

Graphs are DAGs of operator/input nodes with *ordered* fan-in lists.
Sequential circuits are stored acyclically: every register output is a
pseudo primary input whose next-state driver is recorded in ``latch_map``
instead of a feedback edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence


class OperatorKind(Enum):
    PI = "pi"
    PSEUDO_PI = "pseudo_pi"
    AND2 = "and2"
    NOT = "not"
    MUX = "mux"
    CONST0 = "const0"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def is_input(self) -> bool:
        return _ARITY[self] == 0


# MUX fan-in order is (S, A, B) with MUX(S,A,B) = (S and B) or (A and not S).
_ARITY = {
    OperatorKind.PI: 0,
    OperatorKind.PSEUDO_PI: 0,
    OperatorKind.CONST0: 0,
    OperatorKind.NOT: 1,
    OperatorKind.AND2: 2,
    OperatorKind.MUX: 3,
}

MAX_ARITY = max(_ARITY.values())


class CycleError(ValueError):
    """Raised when combinational edges contain a cycle."""


@dataclass(frozen=True)
class CircuitGraph:
    """Immutable circuit DAG with dense integer node ids 0..n-1.

    ``inputs_of[v]`` lists v's predecessors in operator argument order and
    always has length ``kinds[v].arity``.  ``pi_params`` maps each PI to its
    Bernoulli one-probability; ``latch_init`` maps each pseudo-PI to its
    initial state in {0, 1} and ``latch_map`` to its next-state driver.
    """

    kinds: tuple[OperatorKind, ...]
    inputs_of: tuple[tuple[int, ...], ...]
    primary_outputs: tuple[int, ...]
    pi_params: Mapping[int, float] = field(default_factory=dict)
    latch_map: Mapping[int, int] = field(default_factory=dict)
    latch_init: Mapping[int, int] = field(default_factory=dict)

    @staticmethod
    def build(
        kinds: Sequence[OperatorKind],
        inputs_of: Sequence[Sequence[int]],
        primary_outputs: Sequence[int],
        pi_params: Mapping[int, float] | None = None,
        latch_map: Mapping[int, int] | None = None,
        latch_init: Mapping[int, int] | None = None,
    ) -> "CircuitGraph":
        kinds = tuple(kinds)
        if pi_params is None:
            pi_params = {i: 0.5 for i, k in enumerate(kinds) if k is OperatorKind.PI}
        if latch_init is None:
            latch_init = {
                i: 0 for i, k in enumerate(kinds) if k is OperatorKind.PSEUDO_PI
            }
        return CircuitGraph(
            kinds=kinds,
            inputs_of=tuple(tuple(ins) for ins in inputs_of),
            primary_outputs=tuple(primary_outputs),
            pi_params=dict(pi_params),
            latch_map=dict(latch_map or {}),
            latch_init=dict(latch_init),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    @cached_property
    def pi_ids(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is OperatorKind.PI)

    @cached_property
    def pseudo_pi_ids(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is OperatorKind.PSEUDO_PI)

    @cached_property
    def fanouts(self) -> tuple[tuple[int, ...], ...]:
        outs: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for v, ins in enumerate(self.inputs_of):
            for u in ins:
                outs[u].append(v)
        return tuple(tuple(o) for o in outs)

    def in_degree(self, v: int) -> int:
        return len(self.inputs_of[v])


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...]


@dataclass(frozen=True)
class LevelSchedule:
    """Nodes grouped by logic level; the execution plan for simulation and
    encoding.  Level 0 holds exactly the PI/pseudo-PI/CONST0 nodes."""

    levels: tuple[tuple[int, ...], ...]
    level_of: tuple[int, ...]

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1


def validate(graph: CircuitGraph) -> ValidationReport:
    """Check structural invariants; report-style, never raises."""
    violations: list[str] = []
    n = graph.n_nodes
    for v, (kind, ins) in enumerate(zip(graph.kinds, graph.inputs_of)):
        if len(ins) != kind.arity:
            violations.append(
                f"arity mismatch: node {v} ({kind.value}) has {len(ins)} inputs,"
                f" expected {kind.arity}"
            )
        for u in ins:
            if not (0 <= u < n):
                violations.append(f"dangling id: node {v} references {u}")
    for o in graph.primary_outputs:
        if not (0 <= o < n):
            violations.append(f"dangling id: primary output references {o}")
    for v, k in enumerate(graph.kinds):
        if k is OperatorKind.PI and v not in graph.pi_params:
            violations.append(f"missing pi_param for PI node {v}")
        if k is OperatorKind.PSEUDO_PI:
            if graph.latch_init.get(v) not in (0, 1):
                violations.append(f"pseudo-PI node {v} lacks initial state in {{0,1}}")
            if v not in graph.latch_map:
                violations.append(f"pseudo-PI node {v} missing latch_map driver")
    for p in graph.pi_params:
        if graph.kinds[p] is not OperatorKind.PI:
            violations.append(f"pi_param on non-PI node {p}")
        elif not (0.0 <= graph.pi_params[p] <= 1.0):
            violations.append(f"pi_param out of [0,1] on node {p}")
    for ppi, drv in graph.latch_map.items():
        if graph.kinds[ppi] is not OperatorKind.PSEUDO_PI:
            violations.append(f"latch_map key {ppi} is not a pseudo-PI")
        if not (0 <= drv < n):
            violations.append(f"dangling id: latch driver {drv}")
    if not any(v.startswith(("arity", "dangling")) for v in violations):
        try:
            compute_levels(graph)
        except CycleError as exc:
            violations.append(str(exc))
    return ValidationReport(ok=not violations, violations=tuple(violations))


def compute_levels(graph: CircuitGraph) -> LevelSchedule:
    """Assign logic levels: 0 for inputs, 1 + max over predecessors otherwise.

    Latch feedback is already broken by construction (pseudo-PIs), so only
    real combinational edges are walked.  Raises CycleError on a cycle.
    """
    n = graph.n_nodes
    remaining = [len(ins) for ins in graph.inputs_of]
    level = [0] * n
    ready = [v for v in range(n) if remaining[v] == 0]
    order: list[int] = []
    head = 0
    while head < len(ready):
        u = ready[head]
        head += 1
        order.append(u)
        for v in graph.fanouts[u]:
            level[v] = max(level[v], level[u] + 1)
            remaining[v] -= 1
            if remaining[v] == 0:
                ready.append(v)
    if len(order) != n:
        stuck = sorted(v for v in range(n) if remaining[v] > 0)
        raise CycleError(f"cycle among combinational edges involving nodes {stuck}")
    max_level = max(level) if n else 0
    buckets: list[list[int]] = [[] for _ in range(max_level + 1)]
    for v in range(n):
        buckets[level[v]].append(v)
    return LevelSchedule(
        levels=tuple(tuple(b) for b in buckets), level_of=tuple(level)
    )


def padding_overhead(graph: CircuitGraph) -> float:
    """Wasted-slot fraction when padding every node to the max in-degree:
    (n * max_d - sum_d) / (n * max_d), 0 when the max in-degree is 0."""
    if graph.n_nodes == 0:
        raise ValueError("padding_overhead needs at least one node")
    degrees = [graph.in_degree(v) for v in range(graph.n_nodes)]
    max_d = max(degrees)
    if max_d == 0:
        return 0.0
    total = graph.n_nodes * max_d
    return (total - sum(degrees)) / total


def in_degree_histogram(graph: CircuitGraph) -> dict[int, int]:
    hist: dict[int, int] = {}
    for v in range(graph.n_nodes):
        d = graph.in_degree(v)
        hist[d] = hist.get(d, 0) + 1
    return hist


def transitive_fanin(graph: CircuitGraph, roots: Iterable[int]) -> set[int]:
    """All nodes reachable backwards from ``roots`` (roots included)."""
    seen: set[int] = set()
    stack = list(roots)
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(graph.inputs_of[v])
    return seen
