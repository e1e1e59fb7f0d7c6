"""SVD-based rank, bases and least-norm solves.

All rank decisions in the package go through :func:`rank_tolerance` so that
ranks computed in different modules are comparable.
"""
import numpy as np

REL_RANK_TOL = 1e-12
ABS_RANK_FLOOR = 1e-12


def rank_tolerance(shape, smax, rel=REL_RANK_TOL, floor=ABS_RANK_FLOOR):
    """Singular values below this cut count as zero."""
    return max(max(shape) * smax * rel, floor)


def singular_values(a):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def numerical_rank(a, rel=REL_RANK_TOL, floor=ABS_RANK_FLOOR):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    s = singular_values(a)
    return int(np.sum(s > rank_tolerance(a.shape, s[0], rel, floor)))


def column_basis(a, rel=REL_RANK_TOL, floor=ABS_RANK_FLOOR):
    """Orthonormal basis of the column space of ``a`` (n x r)."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > rank_tolerance(a.shape, s[0], rel, floor)))
    return u[:, :r]


def null_space(a, rel=REL_RANK_TOL, floor=ABS_RANK_FLOOR):
    """Orthonormal basis of ker(a) (m x k)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    if a.size == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    r = int(np.sum(s > rank_tolerance(a.shape, s[0], rel, floor)))
    return vt[r:].T.copy()


def condition_number(a):
    s = singular_values(a)
    if s.size == 0:
        return 1.0
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def pseudo_solve(a, b, rel=REL_RANK_TOL, floor=ABS_RANK_FLOOR):
    """Least-norm least-squares solution of ``a @ x = b``.

    Returns ``(x, residual)`` with residual the max-abs entry of ``a @ x - b``.
    ``b`` may be a vector or a matrix of right-hand sides.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0:
        x = np.zeros((a.shape[1],) + b.shape[1:])
        return x, float(np.max(np.abs(b), initial=0.0))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > rank_tolerance(a.shape, s[0], rel, floor)))
    ub = u[:, :r].T @ b
    coef = ub / (s[:r] if b.ndim == 1 else s[:r, None])
    x = vt[:r].T @ coef
    res = a @ x - b
    return x, float(np.max(np.abs(res), initial=0.0))


def pseudo_inverse(a, rel=REL_RANK_TOL, floor=ABS_RANK_FLOOR):
    """Moore-Penrose inverse with the package rank cut."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > rank_tolerance(a.shape, s[0], rel, floor)))
    return (vt[:r].T / s[:r]) @ u[:, :r].T


def intersection_dim(a, b, **kw):
    """dim(col(a) ∩ col(b)) by rank arithmetic on orthonormalised bases."""
    qa, qb = column_basis(a, **kw), column_basis(b, **kw)
    ra, rb = qa.shape[1], qb.shape[1]
    if ra == 0 or rb == 0:
        return 0
    return ra + rb - numerical_rank(np.hstack([qa, qb]), **kw)
