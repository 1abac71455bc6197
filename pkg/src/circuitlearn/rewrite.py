"""Function-preserving structural rewrites, used to mint contrastive
positives.  Every rule keeps the Boolean function of all primary outputs
(checked exhaustively in the test suite) while changing structure."""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .graph import CircuitGraph, OperatorKind


class RewriteRule(Enum):
    DOUBLE_NEGATION = "double_negation"
    AND_INPUT_SWAP = "and_input_swap"
    DEMORGAN = "demorgan"
    AND_REASSOC = "and_reassoc"


@dataclass(frozen=True)
class RewriteResult:
    graph: CircuitGraph
    applied: bool
    rule: RewriteRule
    site: tuple[int, ...] | None = None


class _Builder:
    """Mutable scratch copy of a graph for rewriting."""

    def __init__(self, graph: CircuitGraph):
        self.kinds = list(graph.kinds)
        self.inputs_of = [list(ins) for ins in graph.inputs_of]
        self.outputs = list(graph.primary_outputs)
        self.pi_params = dict(graph.pi_params)
        self.latch_map = dict(graph.latch_map)
        self.latch_init = dict(graph.latch_init)

    def add(self, kind: OperatorKind, ins: list[int]) -> int:
        self.kinds.append(kind)
        self.inputs_of.append(ins)
        return len(self.kinds) - 1

    def redirect(self, old: int, new: int, skip: set[int]) -> None:
        """Point every consumer of ``old`` (except nodes in ``skip``) at
        ``new``; covers fan-in lists, primary outputs, and latch drivers."""
        for v, ins in enumerate(self.inputs_of):
            if v in skip:
                continue
            for i, u in enumerate(ins):
                if u == old:
                    ins[i] = new
        self.outputs = [new if o == old else o for o in self.outputs]
        for k, drv in self.latch_map.items():
            if drv == old:
                self.latch_map[k] = new

    def freeze(self) -> CircuitGraph:
        return CircuitGraph.build(
            kinds=self.kinds,
            inputs_of=self.inputs_of,
            primary_outputs=self.outputs,
            pi_params=self.pi_params,
            latch_map=self.latch_map,
            latch_init=self.latch_init,
        )


def apply_rewrite(graph: CircuitGraph, rule: RewriteRule, seed: int) -> RewriteResult:
    """Apply ``rule`` at a seed-chosen site.

    Returns the input graph unchanged (``applied=False``) when no site is
    applicable, e.g. AND_REASSOC on a gate-free circuit.
    """
    rng = random.Random(seed)
    b = _Builder(graph)

    if rule is RewriteRule.DOUBLE_NEGATION:
        edges = [
            (v, slot)
            for v, ins in enumerate(b.inputs_of)
            for slot in range(len(ins))
        ]
        if not edges:
            return RewriteResult(graph, False, rule)
        v, slot = rng.choice(edges)
        u = b.inputs_of[v][slot]
        n1 = b.add(OperatorKind.NOT, [u])
        n2 = b.add(OperatorKind.NOT, [n1])
        b.inputs_of[v][slot] = n2
        return RewriteResult(b.freeze(), True, rule, (u, v))

    if rule is RewriteRule.AND_INPUT_SWAP:
        ands = [v for v, k in enumerate(b.kinds) if k is OperatorKind.AND2]
        if not ands:
            return RewriteResult(graph, False, rule)
        v = rng.choice(ands)
        b.inputs_of[v].reverse()
        return RewriteResult(b.freeze(), True, rule, (v,))

    if rule is RewriteRule.DEMORGAN:
        # Form A: AND(NOT a, NOT b), i.e. NOT(a or b).  Rebuilt through the
        # dual: NOT of an OR realized as the inverted AND of inverters.
        form_a = [
            v
            for v, k in enumerate(b.kinds)
            if k is OperatorKind.AND2
            and all(b.kinds[u] is OperatorKind.NOT for u in b.inputs_of[v])
        ]
        # Form B: NOT(AND(x, y)), i.e. OR(not x, not y) in disguise.
        form_b = [
            v
            for v, k in enumerate(b.kinds)
            if k is OperatorKind.NOT
            and b.kinds[b.inputs_of[v][0]] is OperatorKind.AND2
        ]
        sites = [("a", v) for v in form_a] + [("b", v) for v in form_b]
        if not sites:
            return RewriteResult(graph, False, rule)
        form, v = rng.choice(sites)
        if form == "a":
            a = b.inputs_of[b.inputs_of[v][0]][0]
            c = b.inputs_of[b.inputs_of[v][1]][0]
            na = b.add(OperatorKind.NOT, [a])
            nc = b.add(OperatorKind.NOT, [c])
            and_n = b.add(OperatorKind.AND2, [na, nc])
            or_n = b.add(OperatorKind.NOT, [and_n])  # a or c
            repl = b.add(OperatorKind.NOT, [or_n])  # not (a or c)
        else:
            g = b.inputs_of[v][0]
            x, y = b.inputs_of[g]
            nx = b.add(OperatorKind.NOT, [x])
            ny = b.add(OperatorKind.NOT, [y])
            px = b.add(OperatorKind.NOT, [nx])
            py = b.add(OperatorKind.NOT, [ny])
            and_n = b.add(OperatorKind.AND2, [px, py])
            repl = b.add(OperatorKind.NOT, [and_n])
        new_ids = set(range(graph.n_nodes, len(b.kinds)))
        b.redirect(v, repl, skip=new_ids)
        return RewriteResult(b.freeze(), True, rule, (v,))

    if rule is RewriteRule.AND_REASSOC:
        sites = [
            (v, slot)
            for v, k in enumerate(b.kinds)
            if k is OperatorKind.AND2
            for slot in (0, 1)
            if b.kinds[b.inputs_of[v][slot]] is OperatorKind.AND2
        ]
        if not sites:
            return RewriteResult(graph, False, rule)
        v, slot = rng.choice(sites)
        g = b.inputs_of[v][slot]
        a, c = b.inputs_of[g]
        if slot == 0:
            # (a and c) and d  ->  a and (c and d)
            d = b.inputs_of[v][1]
            h = b.add(OperatorKind.AND2, [c, d])
            b.inputs_of[v] = [a, h]
        else:
            # d and (a and c)  ->  (d and a) and c
            d = b.inputs_of[v][0]
            h = b.add(OperatorKind.AND2, [d, a])
            b.inputs_of[v] = [h, c]
        return RewriteResult(b.freeze(), True, rule, (v, g))

    raise ValueError(f"unknown rewrite rule {rule}")


def random_equivalent(
    graph: CircuitGraph, seed: int, min_rewrites: int = 1, max_rewrites: int = 3
) -> CircuitGraph:
    """Compose a few random rewrites into a functionally equivalent twin."""
    rng = random.Random(seed)
    out = graph
    for _ in range(rng.randint(min_rewrites, max_rewrites)):
        rule = rng.choice(list(RewriteRule))
        out = apply_rewrite(out, rule, rng.randrange(2**32)).graph
    return out
