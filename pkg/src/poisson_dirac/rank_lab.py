"""Numerical rank diagnostics on submanifolds.

Ranks are grid-level verdicts taken with the shared SVD cut of
:mod:`poisson_dirac.linalg`; nothing here is a continuum statement.
"""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import expr as ex
from . import linalg
from .errors import NotPoissonDirac, OffManifoldError
from .reduction import induced_bivector_graph
from .submanifold import as_graph, check_pd_condition, pi_orthogonal, require_on


@dataclass
class RankIdentity:
    holds: bool
    lhs: int
    rhs: int
    rank_orth: int
    rank_reduced: int


def rank_identity_check(pi, N, p, rel=linalg.REL_RANK_TOL) -> RankIdentity:
    """``rank(pi-orthogonal) + rank(induced anchor) == rank(anchor)`` at ``p``."""
    pd = check_pd_condition(pi, N, p, rel)
    if not pd.is_pd:
        raise NotPoissonDirac(pd.intersection_dim)
    r_orth = pi_orthogonal(pi, N, p, rel).dim
    red = induced_bivector_graph(pi, N, p, check_pd=False).anchor
    r_red = linalg.numerical_rank(red, rel=rel)
    r_pi = linalg.numerical_rank(pi.matrix(p), rel=rel)
    return RankIdentity(r_orth + r_red == r_pi, r_orth + r_red, r_pi, r_orth, r_red)


@dataclass
class RankScanRecord:
    t: float
    point: list
    rank_pi: int
    rank_orth: int
    rank_reduced: int | None
    drop_detected: bool = False
    identity_violated: bool = False
    is_pd: bool = True


def _record(pi, N, t, p, rel):
    r_pi = linalg.numerical_rank(pi.matrix(p), rel=rel)
    r_orth = pi_orthogonal(pi, N, p, rel).dim
    pd = check_pd_condition(pi, N, p, rel)
    if pd.is_pd:
        red = induced_bivector_graph(pi, N, p, check_pd=False).anchor
        r_red = linalg.numerical_rank(red, rel=rel)
        violated = r_orth + r_red != r_pi
    else:
        r_red, violated = None, False
    return RankScanRecord(float(t), [float(v) + 0.0 for v in p], r_pi, r_orth, r_red,
                          identity_violated=violated, is_pd=pd.is_pd)


def path_points(N, path, t_grid):
    """Evaluate path expressions in ``t``; x-block paths are lifted onto ``N``."""
    g = as_graph(N)
    nodes = [ex.as_expr(e) for e in path]
    fn = ex.compile_exprs(nodes, ["t"])
    pts = []
    for t in t_grid:
        v = np.array(fn([float(t)]), dtype=float)
        if len(nodes) == g.n_x and len(nodes) != g.chart.dim:
            v = g.lift(v)
        elif len(nodes) != g.chart.dim:
            raise ValueError(f"path needs {g.chart.dim} (ambient) or {g.n_x} (x-block) expressions")
        pts.append(v)
    return pts


def rank_scan(pi, N, path, t_grid, rel=linalg.REL_RANK_TOL, workers: int = 1):
    """Ranks along a path on ``N``; drops flagged on the induced rank."""
    t_grid = [float(t) for t in t_grid]
    pts = path_points(N, path, t_grid)
    for t, p in zip(t_grid, pts):
        r = N.residual(p)
        if r > 1e-9:
            raise OffManifoldError(r, 1e-9)
    args = list(zip(t_grid, pts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(lambda a: _record(pi, N, a[0], a[1], rel), args))
    else:
        records = [_record(pi, N, t, p, rel) for t, p in args]
    ranks = [r.rank_reduced for r in records]
    for i, rec in enumerate(records):
        if ranks[i] is None:
            continue
        nbrs = [ranks[j] for j in (i - 1, i + 1) if 0 <= j < len(ranks) and ranks[j] is not None]
        rec.drop_detected = bool(nbrs) and ranks[i] < max(nbrs)
    return records


@dataclass
class SemicontinuityResult:
    ok: bool
    violations: list = field(default_factory=list)


def semicontinuity_check(scan, attr: str = "rank_pi") -> SemicontinuityResult:
    """Lower semicontinuity on a grid: no interior point may exceed both neighbours."""
    ranks = [getattr(r, attr) for r in scan]
    bad = []
    for i in range(1, len(ranks) - 1):
        a, b, c = ranks[i - 1], ranks[i], ranks[i + 1]
        if None in (a, b, c):
            continue
        if b > a and b > c:
            bad.append({"index": i, "t": scan[i].t, "rank": b, "neighbours": [a, c]})
    return SemicontinuityResult(not bad, bad)


@dataclass
class CoregularResult:
    coregular: bool
    rank_histogram: dict


def coregular_check(pi, N, samples, rel=linalg.REL_RANK_TOL) -> CoregularResult:
    hist = Counter()
    for p in samples:
        require_on(N, p)
        pd = check_pd_condition(pi, N, p, rel)
        if not pd.is_pd:
            raise NotPoissonDirac(pd.intersection_dim)
        hist[pi_orthogonal(pi, N, p, rel).dim] += 1
    return CoregularResult(len(hist) <= 1, dict(sorted(hist.items())))


def scan_to_json(records) -> str:
    return json.dumps([asdict(r) for r in records], indent=2)


def scan_to_csv(records, coord_names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *coord_names, "rank_pi", "rank_orth", "rank_reduced", "flags"])
    for r in records:
        flags = [name for name, on in (("drop", r.drop_detected),
                                       ("identity_violated", r.identity_violated),
                                       ("not_pd", not r.is_pd)) if on]
        w.writerow([repr(r.t), *map(repr, r.point), r.rank_pi, r.rank_orth,
                    "" if r.rank_reduced is None else r.rank_reduced, "|".join(flags)])
    return buf.getvalue()
