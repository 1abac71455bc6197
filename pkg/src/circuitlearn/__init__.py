"""circuitlearn: functional representation learning for logic circuit graphs.

A library and CLI that learns the behavior of And-Inverter Graphs
(combinational and sequential) with a level-wise transformer encoder and
shift-based probability reconstruction, backed by exact brute-force
simulation oracles for labels and verification.
"""

from .graph import (
    CircuitGraph,
    CycleError,
    LevelSchedule,
    OperatorKind,
    ValidationReport,
    compute_levels,
    in_degree_histogram,
    padding_overhead,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "CircuitGraph",
    "CycleError",
    "LevelSchedule",
    "OperatorKind",
    "ValidationReport",
    "compute_levels",
    "in_degree_histogram",
    "padding_overhead",
    "validate",
    "__version__",
]
