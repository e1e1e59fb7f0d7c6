"""Poisson bivectors on a coordinate chart.

Index convention: ``{x^i, x^j} = pi^{ij}`` and the anchor matrix is
``M[i, j] = pi^{ij}(p)``. Brackets are ``grad(f) @ M @ grad(g)`` and the
Hamiltonian vector field of ``H`` is ``M @ grad(H)``.
"""
from __future__ import annotations

import itertools
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import BindingError, DomainError, PoissonDiracError
from .expr import CoordinateChart, ScalarField

SKEW_SAMPLES = 200
SKEW_TOL = 1e-12


class BivectorField:
    """Skew matrix of expression entries over a chart.

    Build from the upper triangle with :meth:`from_upper` or pass a full
    ``n x n`` nested list of expressions; full matrices are checked for
    skew symmetry at random sample points.
    """

    def __init__(self, chart: CoordinateChart, entries, *, check_samples: int = SKEW_SAMPLES, seed: int = 0):
        n = chart.dim
        rows = [[ex.as_expr(e) for e in row] for row in entries]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"bivector must be {n}x{n}")
        unbound = set()
        for r in rows:
            for e in r:
                unbound |= ex.free_vars(e) - set(chart.names)
        if unbound:
            raise BindingError(unbound)
        for i in range(n):
            if not ex.is_zero(rows[i][i]):
                raise ValueError(f"diagonal entry ({i},{i}) must be the zero expression")
        self.chart = chart
        self.entries = tuple(tuple(r) for r in rows)
        self._fn = None
        self._dfn = None
        if check_samples:
            self._check_skew(check_samples, seed)

    @classmethod
    def from_upper(cls, chart: CoordinateChart, upper: Mapping) -> "BivectorField":
        """``upper`` maps ``(i, j)`` (i < j, 0-based) or ``(name_i, name_j)`` to expressions."""
        n = chart.dim
        rows = [[ex.ZERO] * n for _ in range(n)]
        for key, value in upper.items():
            i, j = (chart.index(k) if isinstance(k, str) else int(k) for k in key)
            if not (0 <= i < j < n):
                raise ValueError(f"upper-triangle key must satisfy i < j, got {key}")
            e = ex.as_expr(value)
            rows[i][j] = e
            rows[j][i] = ex.neg(e)
        return cls(chart, rows, check_samples=0)

    def _check_skew(self, samples, seed):
        n = self.chart.dim
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        if all(self.entries[j][i] == ex.neg(self.entries[i][j]) for i, j in pairs):
            return
        # matrix() only reads the upper triangle, so compare both triangles directly
        upper = ex.compile_exprs([self.entries[i][j] for i, j in pairs], self.chart.names)
        lower = ex.compile_exprs([self.entries[j][i] for i, j in pairs], self.chart.names)
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            p = rng.uniform(-2.0, 2.0, n)
            try:
                u, l = np.array(upper(p), float), np.array(lower(p), float)
            except DomainError:
                continue
            scale = 1.0 + np.max(np.abs(u), initial=0.0)
            if np.max(np.abs(u + l), initial=0.0) > SKEW_TOL * scale:
                raise ValueError(f"bivector entries are not skew at sample point {p.tolist()}")

    @property
    def dim(self):
        return self.chart.dim

    def entry(self, i, j) -> ScalarField:
        return ScalarField(self.chart, self.entries[i][j])

    def upper(self):
        """Nonzero upper-triangle entries as ``{(i, j): Expr}``."""
        n = self.dim
        return {(i, j): self.entries[i][j] for i in range(n) for j in range(i + 1, n)
                if not ex.is_zero(self.entries[i][j])}

    def matrix(self, point) -> np.ndarray:
        p = self.chart.check_point(point)
        if self._fn is None:
            n = self.dim
            upper = [self.entries[i][j] for i in range(n) for j in range(i + 1, n)]
            self._fn = (ex.compile_exprs(upper, self.chart.names), np.triu_indices(n, 1))
        fn, (iu, ju) = self._fn
        m = np.zeros((self.dim, self.dim))
        vals = fn(p)
        m[iu, ju] = vals
        m[ju, iu] = [-v for v in vals]
        return m

    def derivative_tensor(self, point) -> np.ndarray:
        """``T[l, j, k] = d pi^{jk} / d x^l``."""
        p = self.chart.check_point(point)
        n = self.dim
        if self._dfn is None:
            nodes = [ex.differentiate(self.entries[j][k], v)
                     for v in self.chart.names for j in range(n) for k in range(n)]
            self._dfn = ex.compile_exprs(nodes, self.chart.names)
        return np.array(self._dfn(p)).reshape(n, n, n)

    def __repr__(self):
        body = ", ".join(f"{self.chart.names[i]},{self.chart.names[j]}: {ex.to_string(e)}"
                         for (i, j), e in self.upper().items())
        return f"BivectorField({{{body}}})"


def _field(chart, f):
    if isinstance(f, ScalarField):
        if f.chart != chart:
            raise ValueError("field is defined over a different chart")
        return f
    return ScalarField(chart, f)


def anchor_matrix(pi: BivectorField, p) -> np.ndarray:
    return pi.matrix(p)


def bracket_eval(pi: BivectorField, f, g, p) -> float:
    f, g = _field(pi.chart, f), _field(pi.chart, g)
    return float(f.gradient(p) @ pi.matrix(p) @ g.gradient(p))


def hamiltonian_vector_field(pi: BivectorField, H, p) -> np.ndarray:
    H = _field(pi.chart, H)
    return pi.matrix(p) @ H.gradient(p)


def jacobiator_tensor(pi: BivectorField, p) -> np.ndarray:
    """All ``J^{ijk} = sum_l pi^{li} d_l pi^{jk} + pi^{lj} d_l pi^{ki} + pi^{lk} d_l pi^{ij}``."""
    m = pi.matrix(p)
    d = pi.derivative_tensor(p)
    # a[i, j, k] = sum_l m[l, i] d[l, j, k]
    a = np.einsum("li,ljk->ijk", m, d)
    return a + np.transpose(a, (1, 2, 0)) + np.transpose(a, (2, 0, 1))


def jacobiator(pi: BivectorField, p, triple) -> float:
    i, j, k = triple
    if len({i, j, k}) != 3:
        raise ValueError("jacobiator needs three distinct indices")
    return float(jacobiator_tensor(pi, p)[i, j, k])


def max_jacobiator(pi: BivectorField, p):
    """Largest |J| over all distinct index triples and the triple attaining it."""
    n = pi.dim
    if n < 3:
        return 0.0, None
    t = jacobiator_tensor(pi, p)
    best, arg = -1.0, None
    for trip in itertools.combinations(range(n), 3):
        v = abs(t[trip])
        if v > best:
            best, arg = v, trip
    return float(best), arg


def is_casimir(pi: BivectorField, f, samples, tol: float = 1e-10):
    """Returns ``(verdict, max residual)`` where the residual is ``|M grad f|_inf``."""
    f = _field(pi.chart, f)
    samples = list(samples)
    if not samples:
        raise ValueError("is_casimir needs at least one sample point")
    worst = 0.0
    for p in samples:
        worst = max(worst, float(np.max(np.abs(pi.matrix(p) @ f.gradient(p)))))
    return worst <= tol, worst


class ChartMapError(PoissonDiracError):
    pass


def pushforward_bivector(pi: BivectorField, forward: Sequence, inverse: Sequence,
                         new_names: Sequence[str] | None = None, *,
                         samples: int = 50, seed: int = 0, tol: float = 1e-9) -> BivectorField:
    """Express ``pi`` in the chart ``x' = forward(x)``.

    ``forward`` lists expressions in the source coordinates, ``inverse`` lists
    expressions in the target coordinates. The round trip is validated at
    random source points in [-2, 2]^n.
    """
    src = pi.chart
    n = src.dim
    new_names = tuple(new_names) if new_names is not None else tuple(f"{v}_" for v in src.names)
    dst = CoordinateChart(new_names)
    fwd = [ex.as_expr(e) for e in forward]
    inv = [ex.as_expr(e) for e in inverse]
    if len(fwd) != n or len(inv) != n:
        raise ValueError("forward and inverse maps need one expression per coordinate")
    for e in fwd:
        if ex.free_vars(e) - set(src.names):
            raise BindingError(ex.free_vars(e) - set(src.names))
    for e in inv:
        if ex.free_vars(e) - set(dst.names):
            raise BindingError(ex.free_vars(e) - set(dst.names))

    fwd_fn = ex.compile_exprs(fwd, src.names)
    inv_fn = ex.compile_exprs(inv, dst.names)
    rng = np.random.default_rng(seed)
    checked = 0
    for _ in range(samples * 4):
        p = rng.uniform(-2.0, 2.0, n)
        try:
            back = np.array(inv_fn(fwd_fn(p)))
        except DomainError:
            continue
        err = float(np.max(np.abs(back - p)))
        if err > tol:
            raise ChartMapError(f"inverse(forward(p)) differs from p by {err:.3e} at {p.tolist()}")
        checked += 1
        if checked >= samples:
            break
    if checked == 0:
        raise ChartMapError("no sample point could be mapped through the chart change")

    jac = [[ex.differentiate(fa, v) for v in src.names] for fa in fwd]
    back_sub = dict(zip(src.names, inv))
    rows = [[ex.ZERO] * n for _ in range(n)]
    nz = [(i, j, pi.entries[i][j]) for i in range(n) for j in range(n) if not ex.is_zero(pi.entries[i][j])]
    for a in range(n):
        for b in range(a + 1, n):
            terms = [ex.mul(ex.mul(jac[a][i], e), jac[b][j]) for i, j, e in nz]
            entry = ex.substitute(ex.sum_exprs(terms), back_sub)
            rows[a][b] = entry
            rows[b][a] = ex.neg(entry)
    return BivectorField(dst, rows, check_samples=0)
