"""Truncated epsilon power series of bivectors and order-by-order reduction.

A series with coefficients ``pi_0 .. pi_m`` and scale exponent ``s``
represents ``eps^s * pi_eps = sum_i eps^i pi_i``.  Reduction onto a graph
``y = y0(x)`` solves the tangency condition for the extension coefficients
``theta = theta_0 + eps theta_1 + ...`` one order at a time, always with the
order-0 block ``A^T pi_0 A`` as the matrix.

Because the tangency condition is homogeneous in the bivector, the scaling
``eps^s`` does not change ``theta``; it only shifts the orders of the
reduced bracket, ``R_k = Rscaled_{k+s}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import linalg
from .errors import OrderSolveFailed, PoissonDiracError, ScalingSingular
from .poisson import BivectorField
from .submanifold import as_graph, require_on

RESERVED = "eps"
DEFAULT_ORDER = 4
PD_TOL = 1e-10
SOLVE_TOL = 1e-9


class ReservedNameError(PoissonDiracError):
    pass


class EpsBivectorSeries:
    def __init__(self, coefficients, scale_exponent: int = 2):
        coefficients = list(coefficients)
        if not coefficients:
            raise ValueError("series needs at least one coefficient")
        chart = coefficients[0].chart
        for k, c in enumerate(coefficients):
            if c.chart != chart:
                raise ValueError(f"coefficient {k} lives on a different chart")
            for row in c.entries:
                for e in row:
                    if RESERVED in ex.free_vars(e):
                        raise ReservedNameError(
                            f"coefficient {k} uses the reserved name {RESERVED!r};"
                            " coefficients must not depend on eps")
        self.chart = chart
        self.coefficients = coefficients
        self.scale_exponent = int(scale_exponent)

    @property
    def max_order(self):
        return len(self.coefficients) - 1

    def matrices(self, p, upto: int | None = None):
        """Anchor matrices of the coefficients at ``p``, zero-padded to ``upto``."""
        mats = [c.matrix(p) for c in self.coefficients]
        if upto is not None:
            n = self.chart.dim
            mats = (mats + [np.zeros((n, n))] * (upto + 1))[: upto + 1]
        return mats


@dataclass
class EpsSeriesMatrix:
    """Coefficients ``c_k`` of ``sum_k eps^k c_k`` for ``k = start, start+1, ...``."""

    coefficients: list
    start: int = 0

    @property
    def order(self):
        return self.start + len(self.coefficients) - 1

    def coefficient(self, k):
        i = k - self.start
        if 0 <= i < len(self.coefficients):
            return self.coefficients[i]
        return np.zeros_like(self.coefficients[0])

    def evaluate(self, eps, upto=None):
        upto = self.order if upto is None else upto
        out = np.zeros_like(self.coefficients[0], dtype=float)
        for k in range(self.start, upto + 1):
            out = out + eps**k * self.coefficient(k)
        return out


def instantiate(series: EpsBivectorSeries, epsilon: float) -> BivectorField:
    """Concrete bivector ``pi_eps`` with entries ``sum_i eps^(i-s) pi_i``."""
    s = series.scale_exponent
    epsilon = float(epsilon)
    if epsilon == 0.0 and s > 0:
        raise ScalingSingular("eps = 0 leaves the fast block undefined")
    n = series.chart.dim
    upper = {}
    for i in range(n):
        for j in range(i + 1, n):
            terms = []
            for k, c in enumerate(series.coefficients):
                e = c.entries[i][j]
                if ex.is_zero(e):
                    continue
                w = epsilon ** (k - s) if k - s >= 0 else 1.0 / epsilon ** (s - k)
                terms.append(ex.mul(ex.Const(w), e))
            if terms:
                upper[(i, j)] = ex.sum_exprs(terms)
    return BivectorField.from_upper(series.chart, upper)


def _leading_shift(mats, tol=0.0):
    for m, mat in enumerate(mats):
        if np.max(np.abs(mat), initial=0.0) > tol:
            return m
    return None


# ------------------------------------------------------------------ PD check

@dataclass
class SeriesPDResult:
    pd_to_order: bool
    failing_order: int | None = None
    max_violation: float = 0.0


def series_pd_check(series: EpsBivectorSeries, N, p, order: int = DEFAULT_ORDER,
                    tol: float = PD_TOL) -> SeriesPDResult:
    """Order-by-order check that no nonzero tangent vector lies in the pi-orthogonal.

    Annihilator covectors ``a(eps) = sum eps^k a_k`` whose images
    ``v_k = sum_j P_{k-j} A a_j`` satisfy the tangency equations
    ``sum_j C_{k-j} a_j = 0`` up to order ``k`` must give ``v_k = 0``; the first
    order where a nonzero ``v_k`` survives is reported.
    """
    g = as_graph(N)
    _, a, _ = g.frames(p)
    mats = series.matrices(p, upto=order)
    scale = 1.0 + max(float(np.max(np.abs(m), initial=0.0)) for m in mats)
    ny = a.shape[1]
    cs = [a.T @ m @ a for m in mats]
    vs = [m @ a for m in mats]
    for k in range(order + 1):
        dim = (k + 1) * ny
        lower = np.zeros((dim, dim))
        for r in range(k + 1):
            for c in range(r + 1):
                lower[r * ny:(r + 1) * ny, c * ny:(c + 1) * ny] = cs[r - c]
        z = linalg.null_space(lower)
        if z.shape[1] == 0:
            continue
        vk = np.hstack([vs[k - j] for j in range(k + 1)]) @ z
        viol = float(np.max(np.abs(vk), initial=0.0))
        if viol > tol * scale:
            return SeriesPDResult(False, k, viol)
    return SeriesPDResult(True, None, 0.0)


# ------------------------------------------------------------------ extension

def _solve_orders(mats, e, a, upto, tol=SOLVE_TOL, perturb=None):
    """Theta_0 .. Theta_upto for the (already leading-shifted) matrices."""
    cs = [a.T @ m @ a for m in mats]
    bs = [-(a.T @ m @ e) for m in mats]
    scale = 1.0 + max(float(np.abs(x).max(initial=0.0)) for x in cs + bs)
    active = [i for i in range(1, len(cs)) if cs[i].any()]
    c0 = cs[0]
    pinv = linalg.pseudo_inverse(c0)
    thetas = []
    for k in range(upto + 1):
        rhs = bs[k].copy()
        for i in active:
            if i > k:
                break
            rhs -= cs[i] @ thetas[k - i]
        th = pinv @ rhs
        residual = float(np.abs(c0 @ th - rhs).max(initial=0.0))
        if residual > tol * scale:
            raise OrderSolveFailed(k, residual)
        if perturb and k in perturb:
            th = th + perturb[k]
        thetas.append(th)
    return thetas


def _shifted(mats):
    """Drop leading zero coefficients; returns ``(mats, shift)``."""
    m = _leading_shift(mats) or 0
    return mats[m:] + [np.zeros_like(mats[0])] * m, m


def series_extension_solve(series: EpsBivectorSeries, N, p, order: int = DEFAULT_ORDER,
                           tol: float = SOLVE_TOL, perturb=None) -> EpsSeriesMatrix:
    """Extension coefficients ``Theta^0 .. Theta^order`` (each ``n_y x n_x``)."""
    e, a, _ = as_graph(N).frames(p)
    mats, _ = _shifted(series.matrices(p, upto=order))
    return EpsSeriesMatrix(_solve_orders(mats, e, a, order, tol, perturb))


def _contract(mats, e, a, thetas, upto):
    exts = [e + a @ thetas[0]] + [a @ t for t in thetas[1:]]
    active = [b for b in range(upto + 1) if mats[b].any()]
    out = []
    for j in range(upto + 1):
        # sum over i + b + k = j of ext_i^T P_b ext_k
        acc = np.zeros((e.shape[1], e.shape[1]))
        for b in active:
            if b > j:
                break
            for i in range(j - b + 1):
                acc += exts[i].T @ mats[b] @ exts[j - b - i]
        out.append(acc)
    return out


def series_reduced_bivector(series: EpsBivectorSeries, N, p, order: int = DEFAULT_ORDER,
                            tol: float = SOLVE_TOL, perturb=None) -> EpsSeriesMatrix:
    """Reduced anchor coefficients ``R_0 .. R_order`` of the physical bracket.

    Negative powers of eps appear only when the leading coefficients contribute
    below the scale exponent; they are kept (``start < 0``) when nonzero.
    """
    s = series.scale_exponent
    e, a, _ = as_graph(N).frames(p)
    mats, m = _shifted(series.matrices(p, upto=order + s))
    upto = order + s - m
    nx = e.shape[1]
    if upto < 0:
        return EpsSeriesMatrix([np.zeros((nx, nx)) for _ in range(order + 1)])
    thetas = _solve_orders(mats, e, a, upto, tol, perturb)
    scaled = _contract(mats, e, a, thetas, upto)
    # scaled[j] multiplies eps^(j + m) in eps^s pi_eps, i.e. eps^(j + m - s) in pi_eps
    start = m - s
    coeffs = list(scaled)
    while start < 0 and coeffs and not np.any(np.abs(coeffs[0]) > 1e-14):
        coeffs.pop(0)
        start += 1
    if start > 0:
        coeffs = [np.zeros((nx, nx))] * start + coeffs
        start = 0
    return EpsSeriesMatrix(coeffs, start)


class ReducedSeriesField:
    """Truncated reduced anchor ``sum_{k<=order} eps^k R_k`` as a function of x."""

    def __init__(self, series: EpsBivectorSeries, N, order: int, epsilon: float):
        self.series = series
        self.graph = as_graph(N)
        self.order = order
        self.epsilon = float(epsilon)

    def __call__(self, x):
        p = self.graph.lift(x)
        red = series_reduced_bivector(self.series, self.graph, p, self.order)
        return red.evaluate(self.epsilon, upto=self.order)
