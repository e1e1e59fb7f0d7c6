import numpy as np
import pytest

from poisson_dirac.errors import OffManifoldError
from poisson_dirac.expr import CoordinateChart
from poisson_dirac.poisson import BivectorField
from poisson_dirac.submanifold import (GraphSubmanifold, SplitConstraint, annihilator_basis,
                                       check_kernel_nesting, check_pd_condition,
                                       check_transversal, on_manifold, pi_orthogonal,
                                       tangent_basis)

from conftest import builtin, sample_points

GRAPHS = ["lv4", "lagrangian4", "fastslow"]
SPLITS = ["canonical4", "fastslow_split", "kernel3", "casimir3"]


def graph_samples(name, count=50, seed=0):
    s = builtin(name)
    N = s.constraint
    g = N.as_graph() if isinstance(N, SplitConstraint) else N
    return s, N, [g.lift(x) for x in sample_points(g.n_x, count, seed)]


def test_on_manifold_examples():
    lv, c4 = builtin("lv4"), builtin("canonical4")
    assert on_manifold(lv.constraint, [2, 3, 2, 3])
    assert not on_manifold(lv.constraint, [2, 3, 2, 4])
    assert on_manifold(c4.constraint, [1, 1, 0, 0])


def test_off_manifold_queries_raise():
    lv = builtin("lv4")
    with pytest.raises(OffManifoldError):
        tangent_basis(lv.constraint, [2, 3, 2, 4])


def test_lv_frames():
    lv = builtin("lv4")
    p = [1.5, -0.5, 1.5, -0.5]
    assert np.array_equal(tangent_basis(lv.constraint, p).basis.T, [[1, 0, 1, 0], [0, 1, 0, 1]])
    assert np.array_equal(annihilator_basis(lv.constraint, p).basis.T, [[-1, 0, 1, 0], [0, -1, 0, 1]])


def test_zero_graph_frames_are_unit_vectors():
    c4 = builtin("canonical4")
    g = c4.constraint.as_graph()
    assert np.array_equal(tangent_basis(g, [1, 2, 0, 0]).basis, np.eye(4)[:, :2])
    assert np.array_equal(annihilator_basis(g, [1, 2, 0, 0]).basis, np.eye(4)[:, 2:])


def test_fastslow_tangent_columns():
    fs = builtin("fastslow")
    assert np.allclose(tangent_basis(fs.constraint, [1, 1, 1, 1]).basis.T,
                       [[1, 0, 2, 0], [0, 1, 0, 2]])


@pytest.mark.parametrize("name", GRAPHS + SPLITS)
def test_frames_pair_to_zero_and_dimensions_add_up(name):
    s, N, pts = graph_samples(name, 20)
    for p in pts:
        t, a = tangent_basis(N, p), annihilator_basis(N, p)
        scale = 1 + np.max(np.abs(t.basis))
        assert np.max(np.abs(a.basis.T @ t.basis)) <= 1e-12 * scale
        assert t.dim + a.dim == s.chart.dim


def test_lv_pi_orthogonal():
    lv = builtin("lv4")
    orth = pi_orthogonal(lv.bivector, lv.constraint, [1, 1, 1, 1])
    assert orth.dim == 2
    # spanned by the y and z directions
    proj = orth.basis @ orth.basis.T
    assert np.allclose(proj, np.diag([0, 1, 1, 0]), atol=1e-12)
    assert pi_orthogonal(lv.bivector, lv.constraint, np.zeros(4)).dim == 0


def test_lagrangian_graph_is_its_own_orthogonal():
    s, N, pts = graph_samples("lagrangian4", 5)
    for p in pts:
        orth = pi_orthogonal(s.bivector, N, p)
        t = tangent_basis(N, p).basis
        assert orth.dim == 2
        # T_pN lies inside the orthogonal
        resid = t - orth.basis @ (orth.basis.T @ t)
        assert np.max(np.abs(resid)) < 1e-12


def test_pd_and_transversal_verdicts():
    lv = builtin("lv4")
    r = check_pd_condition(lv.bivector, lv.constraint, [1, 1, 1, 1])
    assert r.is_pd and r.intersection_dim == 0
    assert check_pd_condition(lv.bivector, lv.constraint, np.zeros(4)).is_pd
    t = check_transversal(lv.bivector, lv.constraint, [1, 1, 1, 1])
    assert t.is_transversal and t.sum_rank == 4
    t0 = check_transversal(lv.bivector, lv.constraint, np.zeros(4))
    assert not t0.is_transversal and t0.sum_rank == 2
    s, N, pts = graph_samples("lagrangian4", 20)
    for p in pts:
        r = check_pd_condition(s.bivector, N, p)
        assert not r.is_pd and r.intersection_dim == 2


@pytest.mark.parametrize("name", GRAPHS + SPLITS)
def test_transversal_implies_pd(name):
    s, N, pts = graph_samples(name, 30)
    for p in pts:
        if check_transversal(s.bivector, N, p).is_transversal:
            assert check_pd_condition(s.bivector, N, p).is_pd


def test_canonical_split_is_transversal_everywhere():
    s, N, pts = graph_samples("canonical4", 20)
    assert all(check_transversal(s.bivector, N, p).is_transversal for p in pts)


def test_kernel_nesting_examples():
    k3 = builtin("kernel3")
    r = check_kernel_nesting(k3.bivector, k3.constraint, [0.5, 0, 0])
    assert not r.nested
    assert np.allclose(r.witness, [1, 0])
    cas = builtin("casimir3")
    assert check_kernel_nesting(cas.bivector, cas.constraint, [0.3, 0.1, 0]).nested
    c4 = builtin("canonical4")
    r = check_kernel_nesting(c4.bivector, c4.constraint, [1, 2, 0, 0])
    assert r.nested and r.kernel_dim == 0


@pytest.mark.parametrize("name", SPLITS)
def test_nesting_agrees_with_zero_graph_pd(name):
    s, N, pts = graph_samples(name, 50)
    for p in pts:
        nested = check_kernel_nesting(s.bivector, N, p).nested
        assert nested == check_pd_condition(s.bivector, N.as_graph(), p).is_pd


def test_invertible_constraint_matrix_implies_transversal():
    from poisson_dirac import linalg
    from poisson_dirac.submanifold import constraint_blocks
    for name in ("canonical4", "fastslow_split"):
        s, N, pts = graph_samples(name, 30)
        for p in pts:
            cc = constraint_blocks(s.bivector, N, p)[3]
            if linalg.condition_number(cc) < 1e8:
                assert check_transversal(s.bivector, N, p).is_transversal
                assert pi_orthogonal(s.bivector, N, p).dim == len(N.c_indices)


def test_graph_validation():
    chart = CoordinateChart(["x", "y"])
    with pytest.raises(ValueError):
        GraphSubmanifold(chart, ["x"], ["x"], ["0"])
    with pytest.raises(ValueError):
        SplitConstraint(chart, ["x"], [])
