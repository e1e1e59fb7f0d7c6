"""Constraint submanifolds and the pointwise linear algebra on them.

Two presentations are supported:

* :class:`SplitConstraint` -- the zero set ``c = 0`` of a block of chart
  coordinates, the remaining coordinates ``sigma`` parametrising it;
* :class:`GraphSubmanifold` -- the graph ``y = y0(x)`` over a block ``x``.

A split constraint is the graph of ``y0 = 0`` over its sigma block, and every
geometric query on it goes through that identification.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from . import linalg
from .errors import BindingError, OffManifoldError
from .expr import CoordinateChart
from .poisson import BivectorField

ON_MANIFOLD_TOL = 1e-9


def _indices(chart, items):
    return tuple(chart.index(i) if isinstance(i, str) else int(i) for i in items)


def _check_partition(chart, a, b, what):
    if set(a) & set(b):
        raise ValueError(f"{what}: blocks overlap")
    if sorted(a + b) != list(range(chart.dim)):
        raise ValueError(f"{what}: blocks must cover all {chart.dim} coordinates exactly once")


class GraphSubmanifold:
    """Graph of ``y0: X -> Y`` inside the chart; ``y0`` may only use x-block names."""

    def __init__(self, chart: CoordinateChart, x_indices: Sequence, y_indices: Sequence, y0_exprs: Sequence):
        self.chart = chart
        self.x_indices = _indices(chart, x_indices)
        self.y_indices = _indices(chart, y_indices)
        _check_partition(chart, self.x_indices, self.y_indices, "graph")
        if not self.y_indices:
            raise ValueError("graph needs at least one y coordinate")
        self.y0 = tuple(ex.as_expr(e) for e in y0_exprs)
        if len(self.y0) != len(self.y_indices):
            raise ValueError("need one y0 expression per y coordinate")
        x_names = set(self.x_names)
        for e in self.y0:
            bad = ex.free_vars(e) - x_names
            if bad:
                raise BindingError(bad)
        self._y0_fn = ex.compile_exprs(self.y0, self.x_names)
        jac = [ex.differentiate(e, v) for e in self.y0 for v in self.x_names]
        self._jac_fn = ex.compile_exprs(jac, self.x_names)

    @property
    def x_names(self):
        return tuple(self.chart.names[i] for i in self.x_indices)

    @property
    def y_names(self):
        return tuple(self.chart.names[i] for i in self.y_indices)

    @property
    def n_x(self):
        return len(self.x_indices)

    @property
    def n_y(self):
        return len(self.y_indices)

    def x_chart(self) -> CoordinateChart:
        return CoordinateChart(self.x_names)

    def y0_at(self, x) -> np.ndarray:
        return np.array(self._y0_fn(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x) -> np.ndarray:
        """``Dy0(x)`` as an ``n_y x n_x`` matrix."""
        vals = self._jac_fn(np.asarray(x, dtype=float))
        return np.array(vals, dtype=float).reshape(self.n_y, self.n_x)

    def split_point(self, p):
        p = self.chart.check_point(p)
        return p[list(self.x_indices)], p[list(self.y_indices)]

    def lift(self, x) -> np.ndarray:
        """Ambient point on the graph above ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n_x:
            raise ValueError(f"expected {self.n_x} x-coordinates, got {x.shape[0]}")
        p = np.zeros(self.chart.dim)
        p[list(self.x_indices)] = x
        p[list(self.y_indices)] = self.y0_at(x)
        return p

    def residual(self, p) -> float:
        x, y = self.split_point(p)
        return float(np.max(np.abs(y - self.y0_at(x)), initial=0.0))

    def frames(self, p, tol=ON_MANIFOLD_TOL):
        """Embedding matrices ``(E, A)`` at ``p``.

        ``E`` (n x n_x) lifts x-covectors to ambient covectors with zero
        y-part; ``A`` (n x n_y) holds the annihilator columns.
        """
        require_on(self, p, tol)
        x, _ = self.split_point(p)
        d = self.jacobian(x)
        n = self.chart.dim
        xi, yi = list(self.x_indices), list(self.y_indices)
        e = np.zeros((n, self.n_x))
        e[xi, np.arange(self.n_x)] = 1.0
        a = np.zeros((n, self.n_y))
        a[xi, :] = -d.T
        a[yi, np.arange(self.n_y)] = 1.0
        return e, a, d

    def __repr__(self):
        body = ", ".join(f"{y} = {ex.to_string(e)}" for y, e in zip(self.y_names, self.y0))
        return f"GraphSubmanifold({body})"


class SplitConstraint:
    """``Sigma = {c = 0}`` for a block ``c`` of chart coordinates."""

    def __init__(self, chart: CoordinateChart, sigma_indices: Sequence, c_indices: Sequence):
        self.chart = chart
        self.sigma_indices = _indices(chart, sigma_indices)
        self.c_indices = _indices(chart, c_indices)
        _check_partition(chart, self.sigma_indices, self.c_indices, "split constraint")
        if not self.c_indices:
            raise ValueError("split constraint needs at least one c coordinate")

    @property
    def sigma_names(self):
        return tuple(self.chart.names[i] for i in self.sigma_indices)

    @property
    def c_names(self):
        return tuple(self.chart.names[i] for i in self.c_indices)

    def as_graph(self) -> GraphSubmanifold:
        """The same set as the graph of ``c = 0`` over sigma."""
        return GraphSubmanifold(self.chart, self.sigma_indices, self.c_indices, [ex.ZERO] * len(self.c_indices))

    def residual(self, p) -> float:
        p = self.chart.check_point(p)
        return float(np.max(np.abs(p[list(self.c_indices)]), initial=0.0))

    def lift(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float).reshape(-1)
        p = np.zeros(self.chart.dim)
        p[list(self.sigma_indices)] = sigma
        return p

    def __repr__(self):
        return f"SplitConstraint(sigma={list(self.sigma_names)}, c={list(self.c_names)})"


def as_graph(N) -> GraphSubmanifold:
    return N.as_graph() if isinstance(N, SplitConstraint) else N


def on_manifold(N, p, tol: float = ON_MANIFOLD_TOL) -> bool:
    return N.residual(p) <= tol


def require_on(N, p, tol: float = ON_MANIFOLD_TOL):
    r = N.residual(p)
    if r > tol:
        raise OffManifoldError(r, tol)


@dataclass
class Subspace:
    """Basis columns at a base point, with the rank tolerance used to get them."""

    point: np.ndarray
    basis: np.ndarray
    rank_tol: float = linalg.REL_RANK_TOL

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def tangent_basis(N, p) -> Subspace:
    g = as_graph(N)
    e, a, d = g.frames(p)
    t = np.zeros_like(e)
    t[list(g.x_indices), :] = np.eye(g.n_x)
    t[list(g.y_indices), :] = d
    return Subspace(np.asarray(p, float), t)


def annihilator_basis(N, p) -> Subspace:
    g = as_graph(N)
    _, a, _ = g.frames(p)
    return Subspace(np.asarray(p, float), a)


def pi_orthogonal(pi: BivectorField, N, p, rel: float = linalg.REL_RANK_TOL) -> Subspace:
    """Independent basis (orthonormal) of ``M @ annihilator``."""
    a = annihilator_basis(N, p).basis
    image = pi.matrix(p) @ a
    return Subspace(np.asarray(p, float), linalg.column_basis(image, rel=rel), rel)


@dataclass
class PDResult:
    is_pd: bool
    intersection_dim: int


def check_pd_condition(pi: BivectorField, N, p, rel: float = linalg.REL_RANK_TOL) -> PDResult:
    t = tangent_basis(N, p).basis
    orth = pi_orthogonal(pi, N, p, rel).basis
    k = linalg.intersection_dim(t, orth, rel=rel)
    return PDResult(k == 0, k)


@dataclass
class TransversalResult:
    is_transversal: bool
    sum_rank: int
    intersection_dim: int


def check_transversal(pi: BivectorField, N, p, rel: float = linalg.REL_RANK_TOL) -> TransversalResult:
    pd = check_pd_condition(pi, N, p, rel)
    t = linalg.column_basis(tangent_basis(N, p).basis, rel=rel)
    img = linalg.column_basis(pi.matrix(p), rel=rel)
    r = linalg.numerical_rank(np.hstack([t, img]), rel=rel)
    return TransversalResult(pd.is_pd and r == pi.dim, r, pd.intersection_dim)


@dataclass
class NestingResult:
    nested: bool
    witness: np.ndarray | None = None
    kernel_dim: int = 0
    max_violation: float = 0.0


def constraint_blocks(pi: BivectorField, S: SplitConstraint, p):
    """``({sigma,sigma}, {sigma,c}, {c,sigma}, {c,c})`` blocks of the anchor at ``p``."""
    m = pi.matrix(p)
    s, c = list(S.sigma_indices), list(S.c_indices)
    return m[np.ix_(s, s)], m[np.ix_(s, c)], m[np.ix_(c, s)], m[np.ix_(c, c)]


def check_kernel_nesting(pi: BivectorField, S: SplitConstraint, p, tol: float = 1e-10,
                         rel: float = linalg.REL_RANK_TOL) -> NestingResult:
    require_on(S, p)
    _, sc, _, cc = constraint_blocks(pi, S, p)
    kernel = linalg.null_space(cc, rel=rel)
    scale = 1.0 + float(np.max(np.abs(pi.matrix(p))))
    worst, witness = 0.0, None
    if kernel.shape[1] and sc.size:
        # most violated kernel direction
        _, s, vt = np.linalg.svd(sc @ kernel)
        if s.size:
            worst, witness = float(s[0]), kernel @ vt[0]
    if worst > tol * scale:
        # report the witness with its dominant component positive
        k = int(np.argmax(np.abs(witness)))
        witness = witness * np.sign(witness[k])
        return NestingResult(False, witness, kernel.shape[1], worst)
    return NestingResult(True, None, kernel.shape[1], worst)
