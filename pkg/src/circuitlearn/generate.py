"""Random AIG generation for datasets and property tests."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .graph import CircuitGraph, OperatorKind


@dataclass(frozen=True)
class GeneratorSpec:
    n_pis: int
    n_gates: int
    seed: int
    p_not: float = 0.3
    sequential: bool = False
    n_latches: int = 0
    pi_p: float = 0.5


def generate_random_aig(spec: GeneratorSpec) -> CircuitGraph:
    """Deterministically build a valid AIG from a seed.

    Gates draw inputs only from already-created nodes, so the result is
    acyclic by construction; inverters are shared per driver so the graph
    stays in canonical inverter form.  Every sink node becomes a primary
    output, which keeps all logic connected to an output.
    """
    if spec.n_pis < 1:
        raise ValueError("n_pis must be >= 1")
    if spec.n_gates < 1:
        raise ValueError("n_gates must be >= 1")
    if spec.sequential and spec.n_latches < 1:
        raise ValueError("sequential generation needs n_latches >= 1")

    rng = random.Random(spec.seed)
    kinds: list[OperatorKind] = []
    inputs_of: list[list[int]] = []
    not_of: dict[int, int] = {}

    def add(kind: OperatorKind, ins: list[int]) -> int:
        kinds.append(kind)
        inputs_of.append(ins)
        return len(kinds) - 1

    for _ in range(spec.n_pis):
        add(OperatorKind.PI, [])
    n_latches = spec.n_latches if spec.sequential else 0
    pseudo = [add(OperatorKind.PSEUDO_PI, []) for _ in range(n_latches)]

    def operand(candidates: list[int]) -> int:
        v = rng.choice(candidates)
        if rng.random() < spec.p_not:
            if v not in not_of:
                not_of[v] = add(OperatorKind.NOT, [v])
            return not_of[v]
        return v

    and_nodes: list[int] = []
    for _ in range(spec.n_gates):
        pool = list(range(len(kinds)))
        a = operand(pool)
        b = operand(pool)
        and_nodes.append(add(OperatorKind.AND2, [a, b]))

    latch_map = {}
    latch_init = {}
    for v in pseudo:
        latch_map[v] = rng.choice(and_nodes)
        latch_init[v] = rng.randrange(2)

    consumed = {u for ins in inputs_of for u in ins}
    consumed |= set(latch_map.values())
    outputs = [v for v in range(len(kinds)) if v not in consumed]
    if not outputs:
        outputs = [and_nodes[-1]]

    return CircuitGraph.build(
        kinds=kinds,
        inputs_of=inputs_of,
        primary_outputs=outputs,
        pi_params={v: spec.pi_p for v, k in enumerate(kinds) if k is OperatorKind.PI},
        latch_map=latch_map,
        latch_init=latch_init,
    )


def generate_random_tree(n_leaves: int, seed: int) -> CircuitGraph:
    """Random circuit whose DAG is a tree: every node fans out at most once.

    Each leaf is a fresh PI, so all fan-in cones are disjoint and every
    node's inputs are independent; such circuits have zero shift at every
    node, which makes them useful fixtures.
    """
    if n_leaves < 1:
        raise ValueError("need n_leaves >= 1")
    rng = random.Random(seed)
    kinds: list[OperatorKind] = []
    inputs_of: list[list[int]] = []

    def add(kind: OperatorKind, ins: list[int]) -> int:
        kinds.append(kind)
        inputs_of.append(ins)
        return len(kinds) - 1

    def grow(budget: int) -> int:
        if budget == 1:
            node = add(OperatorKind.PI, [])
        else:
            split = rng.randint(1, budget - 1)
            a = grow(split)
            b = grow(budget - split)
            node = add(OperatorKind.AND2, [a, b])
        if rng.random() < 0.3:
            node = add(OperatorKind.NOT, [node])
        return node

    root = grow(n_leaves)
    return CircuitGraph.build(
        kinds=kinds,
        inputs_of=inputs_of,
        primary_outputs=[root],
        pi_params={
            v: round(rng.uniform(0.1, 0.9), 3)
            for v, k in enumerate(kinds)
            if k is OperatorKind.PI
        },
    )
