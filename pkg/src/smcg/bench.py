"""Benchmark harness: run a solver x problem matrix, build Dolan-More
performance profiles and write them as CSV, JSON or SVG.

Command line::

    bench run --solvers smcg,hz,dk,steepest --problems all --out results.csv
    bench profile --metric nf_plus_3ng --in results.csv --svg profile.svg --csv profile.csv
    bench tau-study --out-dir tau_study
    bench check
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .model import SolverOptions
from .problems import get_problem, problem_names
from .solver import solve

log = logging.getLogger(__name__)

# solver name -> option overrides
SOLVERS: dict[str, dict] = {
    "smcg": {"direction_scheme": "smcg", "tau_strategy": "adaptive"},
    "hz": {"direction_scheme": "hz"},
    "dk": {"direction_scheme": "dk"},
    "steepest": {"direction_scheme": "steepest"},
    "smcg_b": {"direction_scheme": "smcg", "tau_strategy": "b"},
    "smcg_h": {"direction_scheme": "smcg", "tau_strategy": "h"},
    "smcg_one": {"direction_scheme": "smcg", "tau_strategy": "one"},
}
TAU_STUDY_SOLVERS = ("smcg", "smcg_b", "smcg_h", "smcg_one")
METRICS = ("iter", "nf", "ng", "nf_plus_3ng", "time")
RECORD_COLUMNS = ("solver", "problem", "n_iter", "n_f", "n_g", "t_cpu", "success", "final_gnorm")


@dataclass(frozen=True)
class RunRecord:
    solver: str
    problem: str
    n_iter: int
    n_f: int
    n_g: int
    t_cpu: float
    success: bool
    final_gnorm: float


@dataclass
class RunConfig:
    solvers: Sequence[str] = ("smcg", "hz", "dk", "steepest")
    problems: Union[str, Sequence[str]] = "all"
    tol: float = 1e-6
    max_iter: int = 50_000
    jobs: int = 1
    seed: int = 0

    def problem_list(self) -> list[str]:
        names = problem_names(self.seed)
        if isinstance(self.problems, str):
            return names if self.problems == "all" else [p for p in self.problems.split(",") if p]
        return list(self.problems)


@dataclass(frozen=True)
class ProfilePoint:
    tau: float
    rho: float


@dataclass
class PerformanceProfile:
    """Right-continuous step functions ``rho_s(tau)``, one per solver."""

    metric: str
    points: dict[str, list[ProfilePoint]]
    n_problems: int
    excluded: list[str] = field(default_factory=list)

    @property
    def solvers(self) -> list[str]:
        return list(self.points)

    def rho(self, solver: str, tau: float) -> float:
        val = 0.0
        for pt in self.points[solver]:
            if pt.tau <= tau:
                val = pt.rho
            else:
                break
        return val


def _run_pair(solver: str, problem: str, tol: float, max_iter: int, seed: int) -> RunRecord:
    prob = get_problem(problem, seed)
    opts = SolverOptions(eps_grad=tol, max_iter=max_iter, **SOLVERS[solver])
    t0 = time.process_time()
    try:
        res = solve(prob, opts)
    except Exception as exc:  # a broken run is a failed record, not a broken matrix
        log.warning("%s on %s raised %r", solver, problem, exc)
        return RunRecord(solver, problem, 0, 0, 0, time.process_time() - t0, False, math.nan)
    t_cpu = time.process_time() - t0
    return RunRecord(solver, problem, res.n_iter, res.n_f, res.n_g, t_cpu, res.success, res.gnorm_inf)


def run_matrix(config: RunConfig) -> list[RunRecord]:
    """Run every (solver, problem) pair; records come back sorted."""
    problems = config.problem_list()
    bad_s = [s for s in config.solvers if s not in SOLVERS]
    known = set(problem_names(config.seed))
    bad_p = [p for p in problems if p not in known]
    if bad_s or bad_p:
        raise ValueError(f"unknown solvers {bad_s} / problems {bad_p}")
    pairs = [(s, p) for s in config.solvers for p in problems]
    args = [(s, p, config.tol, config.max_iter, config.seed) for s, p in pairs]
    if config.jobs > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_run_pair, *zip(*args)))
    else:
        records = [_run_pair(*a) for a in args]
    return sorted(records, key=lambda r: (r.solver, r.problem))


def metric_value(rec: RunRecord, metric: str) -> float:
    if not rec.success:
        return math.inf
    if metric == "iter":
        return float(rec.n_iter)
    if metric == "nf":
        return float(rec.n_f)
    if metric == "ng":
        return float(rec.n_g)
    if metric == "nf_plus_3ng":
        return float(rec.n_f + 3 * rec.n_g)
    if metric == "time":
        return float(rec.t_cpu)
    raise ValueError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")


def perf_profile(records: Iterable[RunRecord], metric: str = "nf_plus_3ng") -> PerformanceProfile:
    """Dolan-More profile of ``records`` under ``metric``.

    Failed or missing runs get ratio ``inf``.  A problem whose best metric
    is 0 has no defined ratio and is dropped with a warning.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")
    records = list(records)
    solvers = sorted({r.solver for r in records})
    problems = sorted({r.problem for r in records})
    if not solvers or not problems:
        raise ValueError("need at least one solver and one problem")
    table = {(r.solver, r.problem): metric_value(r, metric) for r in records}

    ratios: dict[str, list[float]] = {s: [] for s in solvers}
    excluded = []
    for p in problems:
        vals = {s: table.get((s, p), math.inf) for s in solvers}
        best = min(vals.values())
        if best == 0.0:
            warnings.warn(f"problem {p!r} has zero {metric}; excluded from the profile", stacklevel=2)
            excluded.append(p)
            continue
        for s in solvers:
            ratios[s].append(vals[s] / best if math.isfinite(best) else math.inf)

    n_p = len(problems) - len(excluded)
    taus = sorted({1.0} | {r for rs in ratios.values() for r in rs if math.isfinite(r)})
    points = {}
    for s in solvers:
        rs = sorted(ratios[s])
        pts, i = [], 0
        for t in taus:
            while i < len(rs) and rs[i] <= t:
                i += 1
            pts.append(ProfilePoint(t, i / n_p if n_p else 0.0))
        points[s] = pts
    return PerformanceProfile(metric=metric, points=points, n_problems=n_p, excluded=excluded)


# ---------------------------------------------------------------------------
# output


def _open(path, mode="w"):
    try:
        return open(path, mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot open {path}: {exc.strerror or exc}") from exc


def _write_records_csv(records, path):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(
                [r.solver, r.problem, r.n_iter, r.n_f, r.n_g, repr(r.t_cpu),
                 "true" if r.success else "false", repr(r.final_gnorm)]
            )


def _write_profile_csv(profile, path):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["solver", "tau", "rho"])
        for s, pts in profile.points.items():
            for pt in pts:
                w.writerow([s, repr(pt.tau), repr(pt.rho)])


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def profile_svg(profile: PerformanceProfile, width: int = 640, height: int = 420) -> str:
    """Step-function plot of ``rho_s`` against ``log2(tau)``."""
    left, right, top, bottom = 60, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    t_max = max(pt.tau for pts in profile.points.values() for pt in pts)
    x_max = max(math.log2(t_max) * 1.05, 1.0)

    def px(tau):
        return left + pw * math.log2(tau) / x_max

    def py(rho):
        return top + ph * (1.0 - rho)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">log2(tau)</text>',
        f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2})">rho(tau)</text>',
        f'<text x="{left + pw / 2}" y="18" text-anchor="middle">performance profile ({profile.metric})</text>',
    ]
    for i in range(5):
        rho = i / 4
        out.append(f'<text x="{left - 6}" y="{py(rho) + 4:.1f}" text-anchor="end">{rho:.2f}</text>')
    for i in range(5):
        xv = x_max * i / 4
        out.append(
            f'<text x="{left + pw * i / 4:.1f}" y="{top + ph + 16}" text-anchor="middle">{xv:.2g}</text>'
        )
    for j, (s, pts) in enumerate(profile.points.items()):
        color = _COLORS[j % len(_COLORS)]
        coords = []
        prev_rho = 0.0
        for pt in pts:
            x = px(pt.tau)
            coords.append((x, py(prev_rho)))
            coords.append((x, py(pt.rho)))
            prev_rho = pt.rho
        coords.append((left + pw, py(prev_rho)))
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{path}"/>')
        ly = top + 16 + 18 * j
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{s}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit(obj: Union[Sequence[RunRecord], PerformanceProfile], fmt: str, path: Union[str, Path]) -> Path:
    """Write run records or a profile to ``path`` as csv, json or svg."""
    path = Path(path)
    if fmt not in ("csv", "json", "svg"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(obj, PerformanceProfile):
        if fmt == "csv":
            _write_profile_csv(obj, path)
        elif fmt == "json":
            doc = {
                "metric": obj.metric,
                "n_problems": obj.n_problems,
                "excluded": obj.excluded,
                "points": {s: [[p.tau, p.rho] for p in pts] for s, pts in obj.points.items()},
            }
            with _open(path) as fh:
                json.dump(doc, fh, indent=1)
        else:
            with _open(path) as fh:
                fh.write(profile_svg(obj))
        return path
    records = list(obj)
    if fmt == "csv":
        _write_records_csv(records, path)
    elif fmt == "json":
        with _open(path) as fh:
            json.dump([dataclasses.asdict(r) for r in records], fh, indent=1)
    else:
        raise ValueError("svg output needs a profile, not run records")
    return path


def read_records(path: Union[str, Path]) -> list[RunRecord]:
    """Load records written by ``emit`` (format chosen by file suffix)."""
    path = Path(path)
    with _open(path, "r") as fh:
        if path.suffix == ".json":
            return [RunRecord(**row) for row in json.load(fh)]
        rows = list(csv.DictReader(fh))
    return [
        RunRecord(
            solver=row["solver"],
            problem=row["problem"],
            n_iter=int(row["n_iter"]),
            n_f=int(row["n_f"]),
            n_g=int(row["n_g"]),
            t_cpu=float(row["t_cpu"]),
            success=row["success"] == "true",
            final_gnorm=float(row["final_gnorm"]),
        )
        for row in rows
    ]


def tau_study(config: RunConfig, out_dir: Union[str, Path], metrics: Sequence[str] = METRICS) -> dict[str, PerformanceProfile]:
    """Run SMCG under the four tau strategies and write one profile per metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = dataclasses.replace(config, solvers=TAU_STUDY_SOLVERS)
    records = run_matrix(config)
    emit(records, "csv", out_dir / "tau_runs.csv")
    profiles = {}
    for m in metrics:
        prof = perf_profile(records, m)
        emit(prof, "csv", out_dir / f"tau_profile_{m}.csv")
        emit(prof, "svg", out_dir / f"tau_profile_{m}.svg")
        profiles[m] = prof
    return profiles


# ---------------------------------------------------------------------------
# command line


def _jobs(arg: int) -> int:
    env = os.environ.get("BENCH_JOBS")
    return int(env) if env else arg


def _config(args) -> RunConfig:
    return RunConfig(
        solvers=args.solvers.split(",") if hasattr(args, "solvers") else TAU_STUDY_SOLVERS,
        problems=args.problems,
        tol=args.tol,
        max_iter=args.max_iter,
        jobs=_jobs(args.jobs),
        seed=args.seed,
    )


def _summary(records):
    by = {}
    for r in records:
        by.setdefault(r.solver, []).append(r)
    for s, rs in by.items():
        ok = sum(r.success for r in rs)
        print(f"{s:10s} solved {ok}/{len(rs)}  cpu {sum(r.t_cpu for r in rs):.2f}s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="bench", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def matrix_args(p):
        p.add_argument("--problems", default="all", help="comma-separated names or 'all'")
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--max-iter", type=int, default=50_000)
        p.add_argument("--jobs", type=int, default=1, help="worker processes (BENCH_JOBS overrides)")
        p.add_argument("--seed", type=int, default=0, help="seed offset for generated quadratics")

    p_run = sub.add_parser("run", help="run the solver x problem matrix")
    p_run.add_argument("--solvers", default="smcg,hz,dk,steepest")
    matrix_args(p_run)
    p_run.add_argument("--out", default="results.csv", help=".csv or .json")

    p_prof = sub.add_parser("profile", help="performance profile from saved records")
    p_prof.add_argument("--metric", default="nf_plus_3ng", choices=METRICS)
    p_prof.add_argument("--in", dest="inp", required=True)
    p_prof.add_argument("--svg")
    p_prof.add_argument("--csv")
    p_prof.add_argument("--json")

    p_tau = sub.add_parser("tau-study", help="SMCG under the adaptive, B, H and unit tau choices")
    matrix_args(p_tau)
    p_tau.add_argument("--out-dir", default="tau_study")

    p_chk = sub.add_parser("check", help="run the invariant suite")
    p_chk.add_argument("--quick", action="store_true", help="smaller sample counts")

    sub.add_parser("list", help="list solvers and problems")

    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.cmd == "run":
        records = run_matrix(_config(args))
        emit(records, "json" if args.out.endswith(".json") else "csv", args.out)
        _summary(records)
        print(f"wrote {len(records)} records to {args.out}")
    elif args.cmd == "profile":
        prof = perf_profile(read_records(args.inp), args.metric)
        for fmt in ("svg", "csv", "json"):
            dest = getattr(args, fmt)
            if dest:
                emit(prof, fmt, dest)
                print(f"wrote {dest}")
        for s in prof.solvers:
            print(f"{s:10s} rho(1)={prof.rho(s, 1.0):.3f}  rho(inf)={prof.points[s][-1].rho:.3f}")
    elif args.cmd == "tau-study":
        profiles = tau_study(_config(args), args.out_dir)
        for m, prof in profiles.items():
            line = "  ".join(f"{s}={prof.rho(s, 1.0):.2f}" for s in prof.solvers)
            print(f"{m:12s} rho(1): {line}")
        print(f"profiles written to {args.out_dir}")
    elif args.cmd == "check":
        from .checks import run_all

        results = run_all(quick=args.quick)
        for res in results:
            print(res.line())
        return 0 if all(r.passed for r in results) else 1
    elif args.cmd == "list":
        print("solvers:", ", ".join(SOLVERS))
        print("problems:", ", ".join(problem_names()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
