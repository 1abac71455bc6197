"""Dataset records and JSON-lines serialization.

One record per line: {"id", "aag", "pi_params", "labels"?, "sim_pairs"?}.
Circuits travel as ASCII AIGER strings; per-node label channels and
sampled node-pair similarities ride along in the same record so a dataset
is a single self-contained file.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .aiger import parse_aiger, serialize_aiger
from .graph import CircuitGraph, compute_levels
from . import sim

LABEL_CHANNELS = ("global_prob", "local_prob", "shift", "transition_p01", "transition_p10")


class SchemaError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    circuit: CircuitGraph
    labels: dict[str, list[float]] | None = None
    sim_pairs: list[tuple[int, int, float]] | None = None

    def validate(self) -> None:
        n = self.circuit.n_nodes
        if self.labels is not None:
            for name, channel in self.labels.items():
                if name not in LABEL_CHANNELS:
                    raise ValueError(f"record {self.id}: unknown label channel {name}")
                if len(channel) != n:
                    raise ValueError(
                        f"record {self.id}: channel {name} has {len(channel)}"
                        f" values for {n} nodes"
                    )
                lo = -1.0 if name == "shift" else 0.0
                if any(not (lo <= x <= 1.0) for x in channel):
                    raise ValueError(
                        f"record {self.id}: channel {name} out of [{lo},1]"
                    )
        if self.sim_pairs is not None:
            for i, j, s in self.sim_pairs:
                if not (0 <= i < n and 0 <= j < n):
                    raise ValueError(f"record {self.id}: sim pair ({i},{j}) out of range")
                if not (0.0 <= s <= 1.0):
                    raise ValueError(f"record {self.id}: similarity {s} out of [0,1]")


def record_to_json(record: DatasetRecord) -> str:
    obj: dict = {
        "id": record.id,
        "aag": serialize_aiger(record.circuit),
        "pi_params": [record.circuit.pi_params[v] for v in record.circuit.pi_ids],
    }
    if record.labels is not None:
        obj["labels"] = record.labels
    if record.sim_pairs is not None:
        obj["sim_pairs"] = [[i, j, s] for i, j, s in record.sim_pairs]
    return json.dumps(obj, sort_keys=True)


def record_from_json(text: str, line: int) -> DatasetRecord:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"bad JSON: {exc.msg}", line) from None
    for key in ("id", "aag", "pi_params"):
        if key not in obj:
            raise SchemaError(f"missing key {key!r}", line)
    try:
        graph = parse_aiger(obj["aag"])
    except ValueError as exc:
        raise SchemaError(f"bad circuit: {exc}", line) from None
    pi_params = obj["pi_params"]
    if len(pi_params) != len(graph.pi_ids):
        raise SchemaError(
            f"{len(pi_params)} pi_params for {len(graph.pi_ids)} PIs", line
        )
    graph = replace(
        graph, pi_params={v: float(p) for v, p in zip(graph.pi_ids, pi_params)}
    )
    labels = obj.get("labels")
    if labels is not None:
        labels = {k: [float(x) for x in ch] for k, ch in labels.items()}
    sim_pairs = obj.get("sim_pairs")
    if sim_pairs is not None:
        sim_pairs = [(int(i), int(j), float(s)) for i, j, s in sim_pairs]
    record = DatasetRecord(
        id=str(obj["id"]), circuit=graph, labels=labels, sim_pairs=sim_pairs
    )
    try:
        record.validate()
    except ValueError as exc:
        raise SchemaError(str(exc), line) from None
    return record


def write_dataset(records: Iterable[DatasetRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            record.validate()
            fh.write(record_to_json(record))
            fh.write("\n")


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.endswith("\n"):
                raise SchemaError("truncated final line", line_no)
            stripped = line.strip()
            if not stripped:
                continue
            records.append(record_from_json(stripped, line_no))
    return records


def sample_similarity_pairs(
    graph: CircuitGraph, seed: int, pairs_per_node: int = 4
) -> list[tuple[int, int]]:
    """Uniform node pairs with both endpoints at level >= 1."""
    schedule = compute_levels(graph)
    internal = [v for v in range(graph.n_nodes) if schedule.level_of[v] >= 1]
    if len(internal) < 2:
        return []
    rng = random.Random(seed)
    n_pairs = pairs_per_node * graph.n_nodes
    return [tuple(rng.sample(internal, 2)) for _ in range(n_pairs)]


def add_labels(
    record: DatasetRecord,
    tasks: Sequence[str],
    seed: int,
    exhaustive_max_inputs: int = sim.EXHAUSTIVE_MAX_INPUTS,
    mc_samples: int = sim.DEFAULT_MC_PATTERNS,
    cycles: int = 256,
) -> DatasetRecord:
    """Compute the requested label channels with the simulation oracle.

    Falls back to Monte-Carlo when the circuit has more stochastic inputs
    than the exhaustive cap allows.
    """
    graph = record.circuit
    schedule = compute_levels(graph)
    if len(graph.pi_ids) <= exhaustive_max_inputs:
        source: sim.PatternSource = sim.Exhaustive(exhaustive_max_inputs)
    else:
        source = sim.MonteCarlo(seed=seed, n_patterns=mc_samples)
    labels = dict(record.labels or {})
    sim_pairs = record.sim_pairs
    if "prob" in tasks or "shift" in tasks:
        fsl = sim.function_shift_labels(graph, schedule, source)
        labels["global_prob"] = fsl.global_prob.tolist()
        if "shift" in tasks:
            labels["local_prob"] = fsl.local_prob.tolist()
            labels["shift"] = fsl.shift.tolist()
    if "sim" in tasks:
        pairs = sample_similarity_pairs(graph, seed)
        tts = sim.simulate(graph, schedule, source)
        sims = sim.similarity_labels(tts, pairs)
        sim_pairs = [(i, j, s) for (i, j), s in zip(pairs, sims)]
    if "transition" in tasks:
        p01, p10 = sim.transition_labels(graph, n_cycles=cycles, seed=seed)
        labels["transition_p01"] = p01.tolist()
        labels["transition_p10"] = p10.tolist()
    return replace(record, labels=labels or None, sim_pairs=sim_pairs)
