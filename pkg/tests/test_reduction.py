import numpy as np
import pytest

from poisson_dirac.eps_series import instantiate
from poisson_dirac.errors import (KernelNestingViolated, NotPoissonDirac, OffManifoldError,
                                  SingularConstraintMatrix)
from poisson_dirac.expr import CoordinateChart, ScalarField
from poisson_dirac.poisson import BivectorField, max_jacobiator, pushforward_bivector
from poisson_dirac.reduction import (dirac_bracket, induced_bivector_graph, pd_bracket_split,
                                     pd_contract, reduce_hamiltonian, shifted_split)
from poisson_dirac.submanifold import GraphSubmanifold, SplitConstraint, constraint_blocks

from conftest import builtin, sample_points

LV_POINTS = [(2, 3), (1, 1), (-1, 2), (0.5, 4), (3, -2)]


def closed_form_fastslow(q, p, eps):
    return 1.0 / (1.0 + eps**2 * 4 * q * p)


@pytest.mark.parametrize("u,v", LV_POINTS)
def test_lv_graph_reduction_is_uv(u, v):
    lv = builtin("lv4")
    rep = induced_bivector_graph(lv.bivector, lv.constraint, lv.constraint.lift([u, v]))
    assert rep.anchor[0, 1] == pytest.approx(u * v, rel=1e-9)
    assert rep.skew_error == 0.0


@pytest.mark.parametrize("u,v", LV_POINTS)
def test_lv_graph_matches_dirac_in_shifted_chart(u, v):
    lv = builtin("lv4")
    pi2, S = shifted_split(lv.bivector, lv.constraint)
    assert S.c_names == ("c_z", "c_w")
    graph = induced_bivector_graph(lv.bivector, lv.constraint, lv.constraint.lift([u, v])).anchor
    dirac = dirac_bracket(pi2, S, S.lift([u, v])).anchor
    pd = pd_bracket_split(pi2, S, S.lift([u, v])).anchor
    assert np.allclose(graph, dirac, rtol=1e-9, atol=1e-12)
    assert np.allclose(pd, dirac, rtol=1e-9, atol=1e-12)


def test_lv_origin_reduces_to_zero():
    lv = builtin("lv4")
    assert np.array_equal(induced_bivector_graph(lv.bivector, lv.constraint, np.zeros(4)).anchor,
                          np.zeros((2, 2)))


def test_canonical_split_dirac():
    c4 = builtin("canonical4")
    rep = dirac_bracket(c4.bivector, c4.constraint, [0.3, -0.7, 0, 0])
    assert np.array_equal(rep.anchor, [[0, 1], [-1, 0]])


@pytest.mark.parametrize("name", ["canonical4", "fastslow_split"])
def test_pd_bracket_equals_dirac_where_invertible(name):
    s = builtin(name)
    S = s.constraint
    for x in sample_points(len(S.sigma_indices), 50):
        p = S.lift(x)
        d = dirac_bracket(s.bivector, S, p).anchor
        pd = pd_bracket_split(s.bivector, S, p).anchor
        scale = 1 + np.max(np.abs(d))
        assert np.max(np.abs(pd - d)) <= 1e-9 * scale


def test_fastslow_closed_form_all_routes():
    fs, split = builtin("fastslow"), builtin("fastslow_split")
    want = closed_form_fastslow(1, 1, 0.1)
    assert want == pytest.approx(0.9615384615, abs=1e-10)
    g = induced_bivector_graph(fs.bivector, fs.constraint, fs.constraint.lift([1, 1])).anchor
    d = dirac_bracket(split.bivector, split.constraint, [1, 1, 0, 0]).anchor
    assert g[0, 1] == pytest.approx(want, abs=1e-9)
    assert d[0, 1] == pytest.approx(want, abs=1e-9)
    for q, p in sample_points(2, 20, seed=1, box=1.0):
        d = dirac_bracket(split.bivector, split.constraint, [q, p, 0, 0]).anchor
        assert d[0, 1] == pytest.approx(closed_form_fastslow(q, p, 0.1), rel=1e-10)


def test_fastslow_graph_matches_shifted_chart_oracles():
    fs = builtin("fastslow")
    pi2, S = shifted_split(fs.bivector, fs.constraint)
    for x in sample_points(2, 50, seed=4, box=1.0):
        g = induced_bivector_graph(fs.bivector, fs.constraint, fs.constraint.lift(x)).anchor
        d = dirac_bracket(pi2, S, S.lift(x)).anchor
        assert np.max(np.abs(g - d)) <= 1e-9 * (1 + np.max(np.abs(d)))


def test_instantiated_series_agrees_with_builtin_bivector():
    fs = builtin("fastslow")
    inst = instantiate(fs.series, 0.1)
    for p in sample_points(4, 10):
        assert np.allclose(inst.matrix(p), fs.bivector.matrix(p), rtol=1e-14)


def test_casimir_shortcut_returns_sigma_block():
    cas = builtin("casimir3")
    for x in sample_points(2, 20):
        p = cas.constraint.lift(x)
        rep = pd_bracket_split(cas.bivector, cas.constraint, p)
        ss = constraint_blocks(cas.bivector, cas.constraint, p)[0]
        assert rep.method == "casimir_shortcut"
        assert np.max(np.abs(rep.anchor - ss)) <= 1e-12
        assert rep.anchor[0, 1] == pytest.approx(1 + x[0] * x[1])


def test_kernel_nesting_violation_is_reported_with_witness():
    k3 = builtin("kernel3")
    with pytest.raises(KernelNestingViolated) as info:
        pd_bracket_split(k3.bivector, k3.constraint, [0.5, 0, 0])
    assert np.allclose(info.value.witness, [1, 0])


def test_dirac_refuses_singular_constraint_matrix():
    cas = builtin("casimir3")
    with pytest.raises(SingularConstraintMatrix):
        dirac_bracket(cas.bivector, cas.constraint, [0.1, 0.2, 0])


def test_graph_reduction_refuses_non_pd_points():
    s = builtin("lagrangian4")
    with pytest.raises(NotPoissonDirac):
        induced_bivector_graph(s.bivector, s.constraint, s.constraint.lift([0.2, 0.4]))
    with pytest.raises(OffManifoldError):
        induced_bivector_graph(s.bivector, s.constraint, [1, 2, 3, 4])


def test_product_system_zero_graph_keeps_x_block():
    chart = CoordinateChart(["a", "b", "c", "d"])
    pi = BivectorField.from_upper(chart, {("a", "b"): "a*b + 1", ("c", "d"): "1 + c^2"})
    N = GraphSubmanifold(chart, ["a", "b"], ["c", "d"], ["0", "0"])
    for x in sample_points(2, 10):
        rep = induced_bivector_graph(pi, N, N.lift(x))
        assert rep.anchor[0, 1] == pytest.approx(x[0] * x[1] + 1, rel=1e-14)
        assert np.allclose(rep.coefficients, 0)


def _singular_block_system():
    # {c,c} has a one-dimensional kernel (c3 is a Casimir) but nesting holds
    chart = CoordinateChart(["s1", "s2", "c1", "c2", "c3"])
    pi = BivectorField.from_upper(chart, {("s1", "s2"): "1", ("c1", "c2"): "1",
                                          ("s1", "c1"): "s2", ("s2", "c2"): "1"})
    return pi, SplitConstraint(chart, ["s1", "s2"], ["c1", "c2", "c3"])


def test_least_norm_choice_does_not_matter():
    pi, S = _singular_block_system()
    rng = np.random.default_rng(0)
    for x in sample_points(2, 20):
        p = S.lift(x)
        rep = pd_bracket_split(pi, S, p)
        ss, _, _, cc = constraint_blocks(pi, S, p)
        theta = np.asarray(rep.coefficients, float)
        kernel = np.array([0.0, 0.0, 1.0])
        shifted = theta + np.outer(kernel, rng.normal(size=theta.shape[1]))
        other = pd_contract(ss, cc, shifted)
        assert np.max(np.abs(other - rep.anchor)) <= 1e-10 * (1 + np.max(np.abs(rep.anchor)))


def test_reduced_anchor_satisfies_jacobi_on_a_3d_reduction():
    # so3 plus a canonical pair, then a chart change that couples the blocks;
    # the reduced 3-bracket on {c=0} must still satisfy Jacobi
    chart = CoordinateChart(["x1", "x2", "x3", "c1", "c2"])
    base = BivectorField.from_upper(chart, {
        ("x1", "x2"): "-x3", ("x2", "x3"): "-x1", ("x1", "x3"): "x2", ("c1", "c2"): "1"})
    pi = pushforward_bivector(base, ["x1", "x2", "x3", "c1 - x1*x2", "c2 + x3^2"],
                              ["x1", "x2", "x3", "c1 + x1*x2", "c2 - x3^2"], chart.names)
    assert max_jacobiator(pi, [0.3, -0.2, 0.5, 0.1, 0.4])[0] < 1e-12
    S = SplitConstraint(pi.chart, ["x1", "x2", "x3"], ["c1", "c2"])
    assert constraint_blocks(pi, S, S.lift([1, 1, 1]))[1].any()

    def anchor(x):
        return dirac_bracket(pi, S, S.lift(x)).anchor

    h = 1e-5
    for x in sample_points(3, 5, seed=8, box=1.0):
        m = anchor(x)
        dm = np.array([(anchor(x + h * e) - anchor(x - h * e)) / (2 * h) for e in np.eye(3)])
        j = (np.einsum("li,ljk->ijk", m, dm) + np.einsum("lj,lki->ijk", m, dm)
             + np.einsum("lk,lij->ijk", m, dm))
        assert np.max(np.abs(j)) < 1e-7


def test_reduce_hamiltonian_by_substitution():
    fs = builtin("fastslow")
    chart = fs.chart
    h = reduce_hamiltonian(ScalarField(chart, "(a^2 + b^2)/2"), fs.constraint)
    for x in sample_points(2, 5):
        assert h.eval(x) == pytest.approx((x[0] ** 4 + x[1] ** 4) / 2)
    same = reduce_hamiltonian(ScalarField(chart, "q*p"), fs.constraint)
    assert same.eval([2, 3]) == 6.0
    cube = reduce_hamiltonian(ScalarField(chart, "q*a"), fs.constraint)
    assert cube.eval([2, 0.5]) == pytest.approx(8.0)
