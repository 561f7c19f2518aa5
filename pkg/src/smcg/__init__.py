"""Subspace minimization conjugate gradient method with a memoryless
self-scaling quasi-Newton direction, plus HZ and DK baselines and a small
benchmarking harness."""

from .direction import (
    DirectionKind,
    DirectionOutcome,
    RestartReason,
    beta_dk,
    beta_hz,
    perry_shanno,
    project_uv,
    smcg_direction,
    subspace_uv,
)
from .linesearch import LineSearchResult, LineSearchStatus, search
from .model import (
    DirectionScheme,
    IterateState,
    IterationRecord,
    ObjectiveProblem,
    SolverOptions,
    SolverResult,
    Status,
    TauStrategy,
    read_trace,
    validate_options,
    write_trace,
)
from .problems import QuadraticSpec, corpus, get_problem, grad_check, make_quadratic
from .solver import solve

__all__ = [
    "DirectionKind",
    "DirectionOutcome",
    "DirectionScheme",
    "IterateState",
    "IterationRecord",
    "LineSearchResult",
    "LineSearchStatus",
    "ObjectiveProblem",
    "QuadraticSpec",
    "RestartReason",
    "SolverOptions",
    "SolverResult",
    "Status",
    "TauStrategy",
    "beta_dk",
    "beta_hz",
    "corpus",
    "get_problem",
    "grad_check",
    "make_quadratic",
    "perry_shanno",
    "project_uv",
    "read_trace",
    "search",
    "smcg_direction",
    "solve",
    "subspace_uv",
    "validate_options",
    "write_trace",
]
