"""Qutrit state-independent contextuality and its two-qutrit Bell inequality.

Exhaustive certification of classical and local bounds, exact quantum
predictions, the noncontextual-to-Bell conversion, and a shot-level
simulator of the three-path photonic experiments.
"""

from .bell import (
    PartySplit,
    bell_expression,
    entangled_state,
    lhv_bound,
    noisy_state,
    default_split,
    quantum_value_bipartite,
    split_expression,
    symmetrize,
    visibility_threshold,
)
from .inequality import (
    InequalityExpression,
    Pair,
    Single,
    classical_bound,
    kappa_expression,
    quantum_value,
    robustness,
    state_independence_witness,
)
from .rays import OrthogonalityGraph, RayCatalog, build_catalog, build_graph, observable
from .sequential import JointOutcomeTable, luders_joint, sequential_expectation

__version__ = "0.1.0"
