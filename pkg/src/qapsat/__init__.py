"""Random QAP-SAT instances, exact and heuristic solvers, and phase-transition fits."""

from .core import (
    A3,
    ClauseSpec,
    QapInstance,
    QapSatInstance,
    b_clause,
    clause_lower_bound,
    delta_swap,
    evaluate,
    flow_dominance,
    is_satisfied,
    sparsity,
)

__version__ = "0.1.0"
