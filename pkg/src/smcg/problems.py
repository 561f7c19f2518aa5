"""Analytic test problems with exact gradients.

The corpus mixes seeded convex quadratics with classic smooth functions
(Moré, Garbow & Hillstrom 1981 and the usual large-scale extensions).
Each problem documents its formula and start point below.

Quadratics are ``f(x) = 0.5 x'Ax + b'x`` with ``A = Q diag(lam) Q'``, where
``Q`` is a product of three Householder reflections and ``lam`` is
log-uniform in ``[1, cond]`` with both end points included.  ``b = -A x*``
for a seeded random minimizer ``x*``.  All randomness comes from
``numpy.random.default_rng(seed)`` (PCG64), which is reproducible across
platforms for a given numpy major version.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from .model import ObjectiveProblem

_N_HOUSEHOLDER = 3


@dataclass(frozen=True)
class QuadraticSpec:
    n: int
    cond: float
    seed: int = 0

    @classmethod
    def from_json(cls, source: str | Path) -> "QuadraticSpec":
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        data = json.loads(text)
        return cls(n=int(data["n"]), cond=float(data["cond"]), seed=int(data.get("seed", 0)))


class _Quadratic:
    """Matrix-free ``A = Q diag(lam) Q'`` with ``Q`` a Householder product."""

    def __init__(self, lam: np.ndarray, house: np.ndarray, x_star: np.ndarray):
        self.lam = lam
        self.house = house  # rows are unit Householder vectors
        self.x_star = x_star
        self.b = -self.hessp(x_star)
        self.f_star = -0.5 * float(x_star @ self.hessp(x_star))

    def _q(self, v):
        for h in self.house[::-1]:
            v = v - 2.0 * (h @ v) * h
        return v

    def _qt(self, v):
        for h in self.house:
            v = v - 2.0 * (h @ v) * h
        return v

    def hessp(self, v: np.ndarray) -> np.ndarray:
        return self._q(self.lam * self._qt(v))

    # Evaluated around x* so that f differences near the minimizer do not
    # cancel; algebraically identical to 0.5 x'Ax + b'x and Ax + b.
    def f(self, x: np.ndarray) -> float:
        e = x - self.x_star
        return float(0.5 * (e @ self.hessp(e)) + self.f_star)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.hessp(x - self.x_star)

    def dense(self) -> np.ndarray:
        n = self.lam.size
        return np.column_stack([self.hessp(e) for e in np.eye(n)])


@dataclass(frozen=True)
class QuadraticProblem(ObjectiveProblem):
    """Quadratic with Hessian access for closed-form step harnesses."""

    hessp: Callable[[np.ndarray], np.ndarray] = None
    x_star: np.ndarray = None
    eigenvalues: np.ndarray = None
    _op: _Quadratic = None

    def dense_hessian(self) -> np.ndarray:
        return self._op.dense()


def make_quadratic(spec: QuadraticSpec, name: str | None = None) -> QuadraticProblem:
    n, cond = spec.n, spec.cond
    if n < 1:
        raise ValueError("n must be >= 1")
    if not cond >= 1.0:
        raise ValueError("cond must be >= 1")
    rng = np.random.default_rng(spec.seed)
    if n == 1:
        lam = np.ones(1)
    else:
        lam = np.exp(rng.uniform(0.0, math.log(cond), n))
        lam[0], lam[-1] = 1.0, cond
    house = rng.standard_normal((_N_HOUSEHOLDER, n))
    house /= np.linalg.norm(house, axis=1, keepdims=True)
    x_star = rng.uniform(-1.0, 1.0, n)
    op = _Quadratic(lam, house, x_star)
    return QuadraticProblem(
        name=name or f"quadratic_n{n}_c{cond:g}_s{spec.seed}",
        n=n,
        f=op.f,
        grad=op.grad,
        x0=np.zeros(n),
        f_star=op.f_star,
        hessp=op.hessp,
        x_star=x_star,
        eigenvalues=lam.copy(),
        _op=op,
    )


def quadratic_from_matrix(A: np.ndarray, b: np.ndarray, x0: np.ndarray | None = None, name: str = "quadratic") -> QuadraticProblem:
    """Dense-matrix quadratic; ``A`` must be symmetric positive definite."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    lam, V = np.linalg.eigh(A)
    if lam[0] <= 0.0:
        raise ValueError("A must be positive definite")
    x_star = np.linalg.solve(A, -b)
    n = b.size
    return QuadraticProblem(
        name=name,
        n=n,
        f=lambda x: float(0.5 * x @ (A @ x) + b @ x),
        grad=lambda x: A @ x + b,
        x0=np.zeros(n) if x0 is None else x0,
        f_star=float(0.5 * b @ x_star),
        hessp=lambda v: A @ v,
        x_star=x_star,
        eigenvalues=lam,
    )


# ---------------------------------------------------------------------------
# classic functions


def rosenbrock_f(x):
    """Extended Rosenbrock: sum over pairs of 100 (x2 - x1^2)^2 + (1 - x1)^2."""
    a, b = x[0::2], x[1::2]
    return float(np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2))


def rosenbrock_g(x):
    a, b = x[0::2], x[1::2]
    t = b - a * a
    g = np.empty_like(x)
    g[0::2] = -400.0 * a * t - 2.0 * (1.0 - a)
    g[1::2] = 200.0 * t
    return g


def powell_f(x):
    """Extended Powell singular, blocks of four:
    (x1 + 10 x2)^2 + 5 (x3 - x4)^2 + (x2 - 2 x3)^4 + 10 (x1 - x4)^4."""
    x1, x2, x3, x4 = x[0::4], x[1::4], x[2::4], x[3::4]
    return float(
        np.sum((x1 + 10 * x2) ** 2 + 5 * (x3 - x4) ** 2 + (x2 - 2 * x3) ** 4 + 10 * (x1 - x4) ** 4)
    )


def powell_g(x):
    x1, x2, x3, x4 = x[0::4], x[1::4], x[2::4], x[3::4]
    a = x1 + 10 * x2
    b = x3 - x4
    c = x2 - 2 * x3
    e = x1 - x4
    g = np.empty_like(x)
    g[0::4] = 2 * a + 40 * e**3
    g[1::4] = 20 * a + 4 * c**3
    g[2::4] = 10 * b - 8 * c**3
    g[3::4] = -10 * b - 40 * e**3
    return g


def trigonometric_f(x):
    """r_i = n - sum_j cos x_j + i (1 - cos x_i) - sin x_i; f = sum r_i^2."""
    r = _trig_residual(x)
    return float(r @ r)


def _trig_residual(x):
    n = x.size
    c = np.cos(x)
    i = np.arange(1, n + 1)
    return n - c.sum() + i * (1.0 - c) - np.sin(x)


def trigonometric_g(x):
    n = x.size
    r = _trig_residual(x)
    c, sn = np.cos(x), np.sin(x)
    i = np.arange(1, n + 1)
    return 2.0 * sn * r.sum() + 2.0 * r * (i * sn - c)


def beale_f(x):
    x1, x2 = x
    return float(
        (1.5 - x1 + x1 * x2) ** 2 + (2.25 - x1 + x1 * x2**2) ** 2 + (2.625 - x1 + x1 * x2**3) ** 2
    )


def beale_g(x):
    x1, x2 = x
    t1 = 1.5 - x1 + x1 * x2
    t2 = 2.25 - x1 + x1 * x2**2
    t3 = 2.625 - x1 + x1 * x2**3
    return np.array(
        [
            2 * t1 * (x2 - 1) + 2 * t2 * (x2**2 - 1) + 2 * t3 * (x2**3 - 1),
            2 * t1 * x1 + 4 * t2 * x1 * x2 + 6 * t3 * x1 * x2**2,
        ]
    )


def wood_f(x):
    x1, x2, x3, x4 = x
    return float(
        100 * (x2 - x1**2) ** 2
        + (1 - x1) ** 2
        + 90 * (x4 - x3**2) ** 2
        + (1 - x3) ** 2
        + 10.1 * ((x2 - 1) ** 2 + (x4 - 1) ** 2)
        + 19.8 * (x2 - 1) * (x4 - 1)
    )


def wood_g(x):
    x1, x2, x3, x4 = x
    return np.array(
        [
            -400 * x1 * (x2 - x1**2) - 2 * (1 - x1),
            200 * (x2 - x1**2) + 20.2 * (x2 - 1) + 19.8 * (x4 - 1),
            -360 * x3 * (x4 - x3**2) - 2 * (1 - x3),
            180 * (x4 - x3**2) + 20.2 * (x4 - 1) + 19.8 * (x2 - 1),
        ]
    )


def diagonal_quartic_f(x):
    """sum_i (i/n) (x_i - 1)^2 + (x_i - 1)^4."""
    n = x.size
    w = np.arange(1, n + 1) / n
    t = x - 1.0
    return float(np.sum(w * t * t + t**4))


def diagonal_quartic_g(x):
    n = x.size
    w = np.arange(1, n + 1) / n
    t = x - 1.0
    return 2.0 * w * t + 4.0 * t**3


_PENALTY_A = 1e-5


def penalty1_f(x):
    """a sum (x_i - 1)^2 + (sum x_i^2 - 1/4)^2 with a = 1e-5."""
    t = x @ x - 0.25
    return float(_PENALTY_A * np.sum((x - 1.0) ** 2) + t * t)


def penalty1_g(x):
    t = x @ x - 0.25
    return 2.0 * _PENALTY_A * (x - 1.0) + 4.0 * t * x


def raydan1_f(x):
    """sum (i/10) (exp(x_i) - x_i)."""
    w = np.arange(1, x.size + 1) / 10.0
    return float(np.sum(w * (np.exp(x) - x)))


def raydan1_g(x):
    w = np.arange(1, x.size + 1) / 10.0
    return w * (np.exp(x) - 1.0)


def _helix_theta(x1, x2):
    t = math.atan2(x2, x1) / (2.0 * math.pi)
    return t + 1.0 if t < -0.25 else t


def helical_valley_f(x):
    """100 [(x3 - 10 theta)^2 + (sqrt(x1^2 + x2^2) - 1)^2] + x3^2."""
    x1, x2, x3 = x
    th = _helix_theta(x1, x2)
    r = math.hypot(x1, x2)
    return float(100.0 * ((x3 - 10.0 * th) ** 2 + (r - 1.0) ** 2) + x3 * x3)


def helical_valley_g(x):
    x1, x2, x3 = x
    th = _helix_theta(x1, x2)
    r2 = x1 * x1 + x2 * x2
    r = math.sqrt(r2)
    a = x3 - 10.0 * th
    dth1 = -x2 / (2.0 * math.pi * r2)
    dth2 = x1 / (2.0 * math.pi * r2)
    return np.array(
        [
            200.0 * (a * (-10.0 * dth1) + (r - 1.0) * x1 / r),
            200.0 * (a * (-10.0 * dth2) + (r - 1.0) * x2 / r),
            200.0 * a + 2.0 * x3,
        ]
    )


def _classic(name, n, f, g, x0, f_star=None):
    return ObjectiveProblem(name=name, n=n, f=f, grad=g, x0=np.asarray(x0, float), f_star=f_star)


def rosenbrock(n: int) -> ObjectiveProblem:
    x0 = np.tile([-1.2, 1.0], n // 2)
    return _classic(f"rosenbrock_{n}", n, rosenbrock_f, rosenbrock_g, x0, 0.0)


def powell_singular(n: int) -> ObjectiveProblem:
    x0 = np.tile([3.0, -1.0, 0.0, 1.0], n // 4)
    return _classic(f"powell_singular_{n}", n, powell_f, powell_g, x0, 0.0)


def trigonometric(n: int) -> ObjectiveProblem:
    return _classic(f"trigonometric_{n}", n, trigonometric_f, trigonometric_g, np.full(n, 1.0 / n))


QUADRATIC_DIMS = (2, 20, 100, 1000)
QUADRATIC_CONDS = (1e1, 1e3, 1e5)


def _quad_name(n, cond):
    return f"quadratic_{n}_c1e{int(round(math.log10(cond)))}"


def _builders(seed: int = 0) -> dict[str, Callable[[], ObjectiveProblem]]:
    out: dict[str, Callable[[], ObjectiveProblem]] = {}
    for i, n in enumerate(QUADRATIC_DIMS):
        for j, cond in enumerate(QUADRATIC_CONDS):
            name = _quad_name(n, cond)
            spec = QuadraticSpec(n, cond, seed=1000 * (seed + 1) + 10 * i + j)
            out[name] = partial(make_quadratic, spec, name)
    for n in (2, 100, 1000):
        out[f"rosenbrock_{n}"] = partial(rosenbrock, n)
    for n in (4, 100):
        out[f"powell_singular_{n}"] = partial(powell_singular, n)
    for n in (10, 100):
        out[f"trigonometric_{n}"] = partial(trigonometric, n)
    out["beale_2"] = partial(_classic, "beale_2", 2, beale_f, beale_g, [1.0, 1.0], 0.0)
    out["wood_4"] = partial(_classic, "wood_4", 4, wood_f, wood_g, [-3.0, -1.0, -3.0, -1.0], 0.0)
    out["diagonal_quartic_100"] = partial(
        _classic, "diagonal_quartic_100", 100, diagonal_quartic_f, diagonal_quartic_g, np.zeros(100), 0.0
    )
    for n in (10, 100):
        out[f"penalty1_{n}"] = partial(
            _classic, f"penalty1_{n}", n, penalty1_f, penalty1_g, np.arange(1.0, n + 1.0)
        )
    out["raydan1_100"] = partial(
        _classic, "raydan1_100", 100, raydan1_f, raydan1_g, np.ones(100),
        float(np.sum(np.arange(1, 101) / 10.0)),
    )
    out["helical_valley_3"] = partial(
        _classic, "helical_valley_3", 3, helical_valley_f, helical_valley_g, [-1.0, 0.0, 0.0], 0.0
    )
    return out


def problem_names(seed: int = 0) -> list[str]:
    return list(_builders(seed))


def get_problem(name: str, seed: int = 0) -> ObjectiveProblem:
    """Build one corpus member; ``seed`` offsets the quadratic generator seeds."""
    builders = _builders(seed)
    if name not in builders:
        raise KeyError(f"unknown problem {name!r}")
    return builders[name]()


def corpus(seed: int = 0) -> list[ObjectiveProblem]:
    """Every built-in problem (26 of them) in a fixed order."""
    return [build() for build in _builders(seed).values()]


def grad_check(problem: ObjectiveProblem, probes: int = 5, h: float = 1e-6, seed: int = 0) -> float:
    """Largest relative discrepancy between ``problem.grad`` and central
    differences of ``problem.f`` over seeded random points near ``x0``.

    The discrepancy at a point is ``||fd - g||_inf / max(1, ||g||_inf)``;
    the per-coordinate step is ``h * max(1, |x_i|)``.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    rng = np.random.default_rng(seed)
    x0 = problem.x0
    worst = 0.0
    for _ in range(probes):
        x = x0 + 0.5 * (1.0 + np.abs(x0)) * rng.standard_normal(problem.n)
        g = np.asarray(problem.grad(x), dtype=np.float64)
        fd = np.empty(problem.n)
        for i in range(problem.n):
            hi = h * max(1.0, abs(x[i]))
            xp, xm = x.copy(), x.copy()
            xp[i] += hi
            xm[i] -= hi
            fp, fm = problem.f(xp), problem.f(xm)
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise ValueError(f"{problem.name}: non-finite f near probe point {x.tolist()}")
            fd[i] = (fp - fm) / (xp[i] - xm[i])
        err = float(np.max(np.abs(fd - g))) / max(1.0, float(np.max(np.abs(g))))
        worst = max(worst, err)
    return worst
