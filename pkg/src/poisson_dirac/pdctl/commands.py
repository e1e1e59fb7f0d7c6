"""Command implementations behind the ``pd`` CLI.

Every command returns ``(report, exit_code, text)`` where ``text`` is the
alternative CSV payload (or ``None``). Exit codes: 0 computed/pass,
2 mathematical-condition failure, 1 usage or IO problems (raised, not
returned).
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import linalg
from ..eps_series import (DEFAULT_ORDER, instantiate, series_extension_solve, series_pd_check,
                          series_reduced_bivector)
from ..errors import DomainError, ReductionError, SpecError
from ..flow import compare_full_vs_reduced, conservation_report, integrate
from ..poisson import max_jacobiator
from ..rank_lab import rank_scan, scan_to_csv, semicontinuity_check
from ..reduction import (COND_THRESHOLD, SOLVE_TOL, dirac_bracket, induced_bivector_graph,
                         pd_bracket_split, shifted_split)
from ..submanifold import (GraphSubmanifold, SplitConstraint, as_graph, check_kernel_nesting,
                           check_pd_condition, check_transversal, on_manifold, pi_orthogonal)
from .report import make_report

COMMANDS = ("check-jacobi", "classify", "reduce", "rank-scan", "series-reduce", "flow", "compare")
JACOBI_TOL = 1e-10
SAMPLE_BOX = 2.0


@dataclass
class Flags:
    point: list | None = None
    grid: str | None = None
    path: list | None = None
    trange: tuple | None = None
    order: int = DEFAULT_ORDER
    epsilon: list = field(default_factory=list)
    tol: float | None = None
    seed: int = 0
    samples: int | None = None
    method: str | None = None
    dt: float | None = None
    steps: int | None = None
    reduced_stride: int = 100
    format: str = "json"

    def echo(self):
        return {k: v for k, v in asdict(self).items() if v is not None and v != []}


def _tolerances(**extra):
    tol = {"rank_rel": linalg.REL_RANK_TOL, "rank_abs_floor": linalg.ABS_RANK_FLOOR,
           "on_manifold": 1e-9}
    tol.update(extra)
    return tol


def _require(spec, what):
    value = {"constraint": spec.constraint, "hamiltonian": spec.hamiltonian,
             "epsilon_series": spec.series}[what]
    if value is None:
        raise SpecError(f"command needs a spec with '{what}'", spec.source)
    return value


def _manifold_points(spec, N, flags, default_samples):
    """Explicit --point / --grid points, else seeded samples on N."""
    g = as_graph(N)
    if flags.point is not None:
        return [_lift(spec, g, flags.point)]
    if flags.grid is not None:
        return [g.lift(x) for x in _grid(flags.grid, g.n_x)]
    rng = np.random.default_rng(flags.seed)
    n = flags.samples if flags.samples is not None else default_samples
    return [g.lift(rng.uniform(-SAMPLE_BOX, SAMPLE_BOX, g.n_x)) for _ in range(n)]


def _lift(spec, g, point):
    point = np.asarray(point, dtype=float)
    if point.shape[0] == spec.chart.dim:
        return point
    if point.shape[0] == g.n_x:
        return g.lift(point)
    raise SpecError(f"--point needs {spec.chart.dim} ambient or {g.n_x} base coordinates")


def _grid(text, dim):
    axes = []
    for part in text.split(";"):
        a, b, n = part.split(",")
        axes.append(np.linspace(float(a), float(b), int(n)))
    if len(axes) == 1:
        axes = axes * dim
    if len(axes) != dim:
        raise SpecError(f"--grid needs 1 or {dim} axis specs separated by ';'")
    return [np.array(x) for x in itertools.product(*axes)]


def _names(chart, idx):
    return [chart.names[i] for i in idx]


# ----------------------------------------------------------------- commands

def check_jacobi(spec, flags):
    tol = flags.tol if flags.tol is not None else JACOBI_TOL
    n = spec.chart.dim
    if flags.point is not None:
        points = [np.asarray(flags.point, float)]
    else:
        rng = np.random.default_rng(flags.seed)
        count = flags.samples if flags.samples is not None else 100
        points = [rng.uniform(-SAMPLE_BOX, SAMPLE_BOX, n) for _ in range(count)]
    worst, at, triple, skipped = 0.0, None, None, 0
    for p in points:
        try:
            val, trip = max_jacobiator(spec.bivector, p)
        except DomainError:
            skipped += 1
            continue
        if at is None or val > worst:
            worst, at, triple = val, p, trip
    results = {
        "points_checked": len(points) - skipped,
        "points_skipped": skipped,
        "max_residual": worst,
        "at_point": at,
        "triple": None if triple is None else _names(spec.chart, triple),
    }
    ok = worst <= tol
    return make_report("check-jacobi", {"spec": spec.source, **flags.echo()},
                       _tolerances(jacobi=tol), results, "pass" if ok else "fail"), (0 if ok else 2), None


def classify(spec, flags):
    N = _require(spec, "constraint")
    points = _manifold_points(spec, N, flags, 50)
    rows = []
    for p in points:
        row = {"point": p, "on_manifold": on_manifold(N, p)}
        if not row["on_manifold"]:
            rows.append(row)
            continue
        pd = check_pd_condition(spec.bivector, N, p)
        tr = check_transversal(spec.bivector, N, p)
        row.update(pd=pd.is_pd, intersection_dim=pd.intersection_dim,
                   pi_orthogonal_dim=pi_orthogonal(spec.bivector, N, p).dim,
                   transversal=tr.is_transversal, sum_rank=tr.sum_rank)
        if isinstance(N, SplitConstraint):
            nest = check_kernel_nesting(spec.bivector, N, p)
            row.update(kernel_nested=nest.nested, witness=nest.witness)
        rows.append(row)
    on = [r for r in rows if r["on_manifold"]]
    summary = {
        "pd": bool(on) and all(r["pd"] for r in on),
        "transversal": bool(on) and all(r["transversal"] for r in on),
        "points": len(rows),
        "off_manifold": len(rows) - len(on),
    }
    if isinstance(N, SplitConstraint):
        summary["kernel_nested"] = bool(on) and all(r["kernel_nested"] for r in on)
    if not on:
        verdict = "no point on the submanifold"
    elif summary["pd"]:
        verdict = f"Poisson-Dirac condition: no counterexample found at {len(on)} point(s)"
    else:
        verdict = "Poisson-Dirac condition fails at a sampled point"
    results = {**summary, "per_point": rows}
    return make_report("classify", {"spec": spec.source, **flags.echo()}, _tolerances(),
                       results, verdict), 0, None


def _reduce_one(spec, N, p, method):
    pi = spec.bivector
    if method == "graph":
        return induced_bivector_graph(pi, N, p).to_dict()
    if isinstance(N, GraphSubmanifold):
        pi2, S = shifted_split(pi, N)
        q = p.copy()
        q[list(N.y_indices)] = 0.0
    else:
        pi2, S, q = pi, N, p
    rep = dirac_bracket(pi2, S, q) if method == "dirac" else pd_bracket_split(pi2, S, q)
    return rep.to_dict()


def reduce(spec, flags):
    N = _require(spec, "constraint")
    method = flags.method or ("graph" if isinstance(N, GraphSubmanifold) else "pd")
    if method not in ("graph", "dirac", "pd"):
        raise SpecError(f"unknown reduce method {method!r} (graph, dirac, pd)")
    g = as_graph(N)
    points = _manifold_points(spec, N, flags, 1) if (flags.point or flags.grid or flags.samples) else None
    if points is None:
        raise SpecError("reduce needs --point, --grid or --samples")
    rows, error = [], None
    for p in points:
        try:
            rows.append(_reduce_one(spec, N, p, method))
        except ReductionError as exc:
            error = {"type": type(exc).__name__, "message": str(exc), "point": p}
            witness = getattr(exc, "witness", None)
            if witness is not None:
                error["witness"] = witness
            break
    results = {"base_coordinates": list(g.x_names), "per_point": rows}
    tol = _tolerances(solve=SOLVE_TOL, condition_threshold=COND_THRESHOLD)
    inputs = {"spec": spec.source, **flags.echo(), "method": method}
    if error:
        return make_report("reduce", inputs, tol, results, "fail", error), 2, None
    return make_report("reduce", inputs, tol, results, "computed"), 0, None


def rank_scan_cmd(spec, flags):
    N = _require(spec, "constraint")
    if not flags.path or not flags.trange:
        raise SpecError("rank-scan needs --path and --trange")
    a, b, n = flags.trange
    grid = np.linspace(a, b, int(n))
    records = rank_scan(spec.bivector, N, flags.path, grid)
    semi = semicontinuity_check(records)
    drops = [{"t": r.t, "rank_reduced": r.rank_reduced} for r in records if r.drop_detected]
    violated = any(r.identity_violated for r in records)
    results = {
        "drops": drops,
        "semicontinuity_ok": semi.ok,
        "semicontinuity_violations": semi.violations,
        "identity_violated": violated,
        "records": [asdict(r) for r in records],
    }
    ok = semi.ok and not violated
    report = make_report("rank-scan", {"spec": spec.source, **flags.echo()}, _tolerances(),
                         results, "computed" if ok else "fail")
    text = scan_to_csv(records, spec.chart.names) if flags.format == "csv" else None
    return report, (0 if ok else 2), text


def series_reduce(spec, flags):
    series = _require(spec, "epsilon_series")
    N = _require(spec, "constraint")
    g = as_graph(N)
    points = _manifold_points(spec, N, flags, 1) if (flags.point or flags.grid or flags.samples) else [g.lift(np.ones(g.n_x))]
    rows, error = [], None
    for p in points:
        pd = series_pd_check(series, g, p, flags.order)
        row = {"point": p, "pd_to_order": pd.pd_to_order, "failing_order": pd.failing_order}
        if not pd.pd_to_order:
            rows.append(row)
            error = {"type": "SeriesNotPoissonDirac", "failing_order": pd.failing_order, "point": p}
            break
        try:
            theta = series_extension_solve(series, g, p, flags.order)
            red = series_reduced_bivector(series, g, p, flags.order)
        except ReductionError as exc:
            error = {"type": type(exc).__name__, "message": str(exc), "point": p}
            rows.append(row)
            break
        row["extension_coefficients"] = theta.coefficients
        row["reduced_start_order"] = red.start
        row["reduced_coefficients"] = red.coefficients
        checks = []
        for eps in flags.epsilon:
            direct = induced_bivector_graph(instantiate(series, eps), g, p).anchor
            trunc = red.evaluate(eps, upto=flags.order)
            checks.append({"epsilon": eps, "direct": direct, "truncated": trunc,
                           "truncation_error": float(np.max(np.abs(direct - trunc)))})
        if checks:
            row["epsilon_checks"] = checks
        rows.append(row)
    results = {"base_coordinates": list(g.x_names), "scale_exponent": series.scale_exponent,
               "order": flags.order, "per_point": rows}
    inputs = {"spec": spec.source, **flags.echo()}
    tol = _tolerances(solve=SOLVE_TOL)
    if error:
        return make_report("series-reduce", inputs, tol, results, "fail", error), 2, None
    return make_report("series-reduce", inputs, tol, results, "computed"), 0, None


def flow_cmd(spec, flags):
    H = _require(spec, "hamiltonian")
    if flags.point is None:
        raise SpecError("flow needs --point for the initial state")
    pi = spec.bivector
    if spec.series is not None and flags.epsilon:
        pi = instantiate(spec.series, flags.epsilon[0])
    dt = flags.dt if flags.dt is not None else 1e-3
    steps = flags.steps if flags.steps is not None else 1000
    method = flags.method or "rk4"
    traj = integrate(pi, H, flags.point, dt, steps, method)
    fields = [H] + list(spec.invariants)
    drifts = conservation_report(traj, fields)
    results = {
        "final_time": float(traj.times[-1]),
        "final_state": traj.final,
        "drift": {str(f): d for f, d in zip(fields, drifts)},
    }
    report = make_report("flow", {"spec": spec.source, **flags.echo(), "method": method},
                         _tolerances(midpoint=1e-12), results, "computed")
    return report, 0, (traj.to_csv() if flags.format == "csv" else None)


def compare_cmd(spec, flags):
    series = _require(spec, "epsilon_series")
    N = _require(spec, "constraint")
    H = _require(spec, "hamiltonian")
    g = as_graph(N)
    if flags.point is None:
        raise SpecError("compare needs --point for the initial state")
    p0 = _lift(spec, g, flags.point)
    eps_list = flags.epsilon or [0.05]
    dt = flags.dt if flags.dt is not None else 1e-4
    steps = flags.steps if flags.steps is not None else 100000
    runs = []
    for eps in eps_list:
        res = compare_full_vs_reduced(series, g, H, p0, eps, dt, steps, flags.order,
                                      flags.reduced_stride, flags.method or "rk4")
        runs.append({"epsilon": eps, "constraint_drift": res.constraint_drift,
                     "slow_variable_gap": res.slow_variable_gap})
    order = sorted(runs, key=lambda r: -r["epsilon"])
    gaps = [r["slow_variable_gap"] for r in order]
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    bounded = all(np.isfinite(r["slow_variable_gap"]) and np.isfinite(r["constraint_drift"]) for r in runs)
    results = {"runs": runs, "gap_non_increasing_as_eps_decreases": monotone}
    ok = monotone and bounded
    return make_report("compare", {"spec": spec.source, **flags.echo()}, _tolerances(),
                       results, "pass" if ok else "fail"), (0 if ok else 2), None


HANDLERS = {
    "check-jacobi": check_jacobi,
    "classify": classify,
    "reduce": reduce,
    "rank-scan": rank_scan_cmd,
    "series-reduce": series_reduce,
    "flow": flow_cmd,
    "compare": compare_cmd,
}


def run_command(cmd, spec, flags: Flags):
    """Dispatch ``cmd``; returns ``(report, exit_code, csv_text_or_None)``."""
    try:
        handler = HANDLERS[cmd]
    except KeyError:
        raise SpecError(f"unknown command {cmd!r}; choose from {', '.join(COMMANDS)}") from None
    return handler(spec, flags)
