"""Domain types shared by the direction, line search, solver and bench modules."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np


class TauStrategy(str, enum.Enum):
    ADAPTIVE = "adaptive"
    B = "b"
    H = "h"
    ONE = "one"


class DirectionScheme(str, enum.Enum):
    SMCG = "smcg"
    HZ = "hz"
    DK = "dk"
    STEEPEST = "steepest"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    LINE_SEARCH_FAILURE = "line_search_failure"


def _coerce_enum(cls, value):
    if isinstance(value, cls):
        return value
    try:
        return cls(str(value).lower())
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown {cls.__name__} {value!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class ObjectiveProblem:
    """A smooth unconstrained problem ``min f(x)`` with an analytic gradient.

    Evaluators must be re-entrant: the bench module may run several problems
    at once, so ``f`` and ``grad`` cannot keep hidden mutable state.
    """

    name: str
    n: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    f_star: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"{self.name}: dimension must be >= 1, got {self.n}")
        x0 = np.ascontiguousarray(self.x0, dtype=np.float64)
        if x0.shape != (self.n,):
            raise ValueError(f"{self.name}: x0 has shape {x0.shape}, expected ({self.n},)")
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and parameters of the subspace minimization CG driver.

    The ``xi*``/``eta1``/``eta2`` defaults are the published experimental
    values. ``delta``, ``sigma``, ``eps_f`` follow CGOPT-family conventions;
    ``eps1``, ``max_restart``, ``min_quad``, ``phi`` and ``eta_bar_scale``
    are local choices.
    """

    eps_grad: float = 1e-6
    xi1: float = 0.75
    xi2: float = 0.5
    xi2_bar: float = 10.0
    xi2_bbar: float = 0.2
    xi3: float = 7.5e-5
    xi4: float = 9e-4
    xi5: float = 0.9
    xi6: float = 10.0
    eta1: float = 0.99
    eta2: float = 3.0
    delta: float = 0.1
    sigma: float = 0.9
    eps_f: float = 1e-6
    eps1: float = 1e-8
    max_restart: int = 80
    min_quad: int = 20
    phi: float = 2.0
    eta_bar_scale: float = 1e-3
    max_iter: int = 200_000
    max_ls_iter: int = 50
    tau_strategy: TauStrategy = TauStrategy.ADAPTIVE
    direction_scheme: DirectionScheme = DirectionScheme.SMCG

    def __post_init__(self):
        object.__setattr__(self, "tau_strategy", _coerce_enum(TauStrategy, self.tau_strategy))
        object.__setattr__(
            self, "direction_scheme", _coerce_enum(DirectionScheme, self.direction_scheme)
        )

    def replace(self, **changes) -> "SolverOptions":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["tau_strategy"] = self.tau_strategy.value
        out["direction_scheme"] = self.direction_scheme.value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SolverOptions":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown option field(s): {', '.join(unknown)}")
        return validate_options(cls(**data))

    @classmethod
    def from_json(cls, source: str | Path) -> "SolverOptions":
        """Load options from a JSON document or a path to one."""
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        return cls.from_dict(json.loads(text))


def validate_options(opts: SolverOptions) -> SolverOptions:
    """Return ``opts`` unchanged if every constraint holds, else raise ValueError.

    Only positivity is enforced for ``xi2_bar`` and ``eta2``: the published
    experiments use values above one for both.
    """
    checks = [
        (opts.delta < opts.sigma, "delta < sigma"),
        (0.0 < opts.delta, "delta > 0"),
        (opts.sigma < 1.0, "sigma < 1"),
        (0.0 < opts.xi1 < 1.0, "xi1 in (0,1)"),
        (opts.eps_grad > 0.0, "eps_grad > 0"),
        (opts.xi3 < opts.xi4, "xi3 < xi4"),
    ]
    for name in ("xi2", "xi2_bar", "xi2_bbar", "xi3", "xi4", "xi5", "xi6", "eta1", "eta2"):
        checks.append((getattr(opts, name) > 0.0, f"{name} > 0"))
    checks += [
        (opts.eps_f > 0.0, "eps_f > 0"),
        (opts.eps1 > 0.0, "eps1 > 0"),
        (opts.phi > 0.0, "phi > 0"),
        (opts.eta_bar_scale > 0.0, "eta_bar_scale > 0"),
        (opts.max_restart >= 1, "max_restart >= 1"),
        (opts.min_quad >= 1, "min_quad >= 1"),
        (opts.max_iter >= 1, "max_iter >= 1"),
        (opts.max_ls_iter >= 1, "max_ls_iter >= 1"),
    ]
    for ok, label in checks:
        if not ok:
            raise ValueError(f"{label} violated")
    return opts


@dataclass
class IterateState:
    """Rolling window of the current and previous iterate.

    ``*_prev`` fields are ``None`` at ``k == 0``. ``mu_prev`` is the
    quadratic-closeness measure of the previous iteration (``inf`` when it
    was never computed).
    """

    k: int
    x: np.ndarray
    f_k: float
    g_k: np.ndarray
    f_prev: Optional[float] = None
    g_prev: Optional[np.ndarray] = None
    s_prev: Optional[np.ndarray] = None
    y_prev: Optional[np.ndarray] = None
    d_prev: Optional[np.ndarray] = None
    alpha_prev: Optional[float] = None
    mu_prev: float = float("inf")
    iter_restart: int = 0
    iter_quad: int = 0

    def advance(self, alpha: float, d: np.ndarray, f_new: float, g_new: np.ndarray) -> "IterateState":
        """State after accepting the step ``alpha * d``."""
        s = alpha * d
        return IterateState(
            k=self.k + 1,
            x=self.x + s,
            f_k=f_new,
            g_k=g_new,
            f_prev=self.f_k,
            g_prev=self.g_k,
            s_prev=s,
            y_prev=g_new - self.g_k,
            d_prev=d,
            alpha_prev=alpha,
            mu_prev=self.mu_prev,
            iter_restart=self.iter_restart,
            iter_quad=self.iter_quad,
        )


@dataclass
class IterationRecord:
    k: int
    f: float
    gnorm_inf: float
    alpha: float
    direction_kind: str
    u: float
    v: float
    tau: float
    gtd: float
    n_f_cum: int
    n_g_cum: int
    # audit: f_start is f before the step, dphi_new is g(x_new)'d
    restart_reason: Optional[str] = None
    f_start: float = float("nan")
    dphi_new: float = float("nan")
    eta_bar: float = float("nan")
    sty: float = float("nan")
    ls_status: str = ""
    mu: float = float("nan")
    r: float = float("nan")
    r_bar: float = float("nan")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), allow_nan=True)


@dataclass
class SolverResult:
    x_final: np.ndarray
    f_final: float
    gnorm_inf: float
    n_iter: int
    n_f: int
    n_g: int
    status: Status
    trace: Optional[list[IterationRecord]] = None
    zoutendijk_sum: float = 0.0
    n_restarts: dict[str, int] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status is Status.CONVERGED


def write_trace(trace: list[IterationRecord], path: str | Path) -> None:
    """Write one JSON object per line."""
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(rec.to_json() + "\n")


def read_trace(path: str | Path) -> list[IterationRecord]:
    with open(path) as fh:
        return [IterationRecord(**json.loads(line)) for line in fh if line.strip()]
