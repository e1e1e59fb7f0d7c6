"""Reduced brackets on constraint submanifolds.

Three routes to the bracket induced on a constraint set:

``dirac_bracket``
    classical formula, needs ``{c,c}`` invertible;
``pd_bracket_split``
    least-norm solutions of ``{c,c} theta = -{c,sigma} e`` contracted
    against ``{c,c}``, valid whenever ``ker{c,c} ⊂ ker{sigma,c}``;
``induced_bivector_graph``
    extension covectors ``e + A theta`` (``A`` the annihilator frame) whose
    Hamiltonian vectors are tangent to a graph submanifold.

All solves are pointwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import linalg
from .errors import (ExtensionInsolvable, KernelNestingViolated, NotPoissonDirac,
                     SingularConstraintMatrix)
from .expr import ScalarField
from .poisson import BivectorField, pushforward_bivector
from .submanifold import (GraphSubmanifold, SplitConstraint, as_graph, check_kernel_nesting,
                          check_pd_condition, constraint_blocks, require_on)

COND_THRESHOLD = 1e8
SOLVE_TOL = 1e-9


@dataclass
class ReducedBivectorReport:
    point: np.ndarray
    anchor: np.ndarray
    method: str
    residual: float = 0.0
    coefficients: np.ndarray | None = None
    cond: float | None = None

    @property
    def skew_error(self) -> float:
        return float(np.max(np.abs(self.anchor + self.anchor.T), initial=0.0))

    def to_dict(self):
        out = {
            "point": self.point.tolist(),
            "method": self.method,
            "reduced_anchor": self.anchor.tolist(),
            "solver_residual": self.residual,
        }
        if self.coefficients is not None:
            out["extension_coefficients"] = self.coefficients.tolist()
        if self.cond is not None:
            out["condition_number"] = self.cond
        return out


def _scale(*arrays):
    return 1.0 + max(float(np.max(np.abs(a), initial=0.0)) for a in arrays)


def dirac_bracket(pi: BivectorField, S: SplitConstraint, p, cond_threshold: float = COND_THRESHOLD):
    require_on(S, p)
    ss, sc, cs, cc = constraint_blocks(pi, S, p)
    cond = linalg.condition_number(cc)
    if not cond < cond_threshold:
        raise SingularConstraintMatrix(cond, cond_threshold)
    x = np.linalg.solve(cc, cs)
    red = ss - sc @ x
    residual = float(np.max(np.abs(cc @ x - cs), initial=0.0))
    return ReducedBivectorReport(np.asarray(p, float), red, "dirac", residual, cond=cond)


def pd_contract(ss, cc, theta):
    """``{sigma_i, sigma_j} - theta_i . {c,c} . theta_j`` for columns ``theta_i``."""
    return ss - theta.T @ cc @ theta


def pd_bracket_split(pi: BivectorField, S: SplitConstraint, p, tol: float = SOLVE_TOL):
    require_on(S, p)
    ss, sc, cs, cc = constraint_blocks(pi, S, p)
    if not np.any(cc) and not np.any(sc):
        # c is a Casimir block here: every theta works and the correction vanishes
        return ReducedBivectorReport(np.asarray(p, float), ss.copy(), "casimir_shortcut",
                                     coefficients=np.zeros_like(cs))
    theta, residual = linalg.pseudo_solve(cc, -cs)
    if residual > tol * _scale(cc, cs):
        nest = check_kernel_nesting(pi, S, p)
        witness = nest.witness if nest.witness is not None else np.zeros(len(S.c_indices))
        raise KernelNestingViolated(witness, residual)
    return ReducedBivectorReport(np.asarray(p, float), pd_contract(ss, cc, theta), "pd_split",
                                 residual, coefficients=theta)


def extension_system(pi: BivectorField, N, p):
    """Pieces of the tangency condition ``A^T M (E + A theta) = 0`` at ``p``.

    Returns ``(M, E, A, C, B)`` with ``C = A^T M A`` and ``B = -A^T M E``.
    """
    g = as_graph(N)
    e, a, _ = g.frames(p)
    m = pi.matrix(p)
    return m, e, a, a.T @ m @ a, -(a.T @ m @ e)


def induced_bivector_graph(pi: BivectorField, N, p, tol: float = SOLVE_TOL, check_pd: bool = True):
    """Bivector induced on a graph submanifold at ``p`` (ambient point).

    Each x-covector ``e_i`` is extended to ``e_i + A theta_i``; ``theta_i``
    is the least-norm solution of the tangency condition.
    """
    if check_pd:
        pd = check_pd_condition(pi, N, p)
        if not pd.is_pd:
            raise NotPoissonDirac(pd.intersection_dim)
    m, e, a, c, b = extension_system(pi, N, p)
    theta, residual = linalg.pseudo_solve(c, b)
    if residual > tol * _scale(c, b):
        raise ExtensionInsolvable(residual, tol)
    ext = e + a @ theta
    red = ext.T @ m @ ext
    return ReducedBivectorReport(np.asarray(p, float), red, "graph_extension", residual, coefficients=theta)


def reduce_hamiltonian(H: ScalarField, N) -> ScalarField:
    """Pull ``H`` back to the x-block by substituting ``y = y0(x)``."""
    g = as_graph(N)
    mapping = dict(zip(g.y_names, g.y0))
    return ScalarField(g.x_chart(), ex.substitute(H.expr, mapping))


def shifted_split(pi: BivectorField, N: GraphSubmanifold, c_names=None):
    """Re-express ``pi`` in the chart ``(x, c = y - y0(x))``.

    Returns the pushed-forward bivector and the split constraint ``c = 0``;
    the new chart keeps the ambient coordinate order, with each y name
    replaced by its ``c`` counterpart.
    """
    chart = pi.chart
    yset = dict(zip(N.y_indices, range(N.n_y)))
    c_names = list(c_names) if c_names else [f"c_{n}" for n in N.y_names]
    new_names = [c_names[yset[i]] if i in yset else chart.names[i] for i in range(chart.dim)]
    forward, inverse = [], []
    for i in range(chart.dim):
        if i in yset:
            k = yset[i]
            forward.append(ex.sub(ex.Var(chart.names[i]), N.y0[k]))
            inverse.append(ex.add(ex.Var(c_names[k]), N.y0[k]))
        else:
            forward.append(ex.Var(chart.names[i]))
            inverse.append(ex.Var(chart.names[i]))
    pushed = pushforward_bivector(pi, forward, inverse, new_names)
    return pushed, SplitConstraint(pushed.chart, N.x_indices, N.y_indices)
