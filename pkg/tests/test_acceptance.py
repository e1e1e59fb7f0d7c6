"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py`` (lines are printed even without
``-s``) or ``python tests/test_acceptance.py`` for a plain summary.
"""
import contextlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import builtin  # noqa: E402
from poisson_dirac.eps_series import instantiate, series_reduced_bivector  # noqa: E402
from poisson_dirac.expr import ScalarField  # noqa: E402
from poisson_dirac.flow import compare_full_vs_reduced, conservation_report, integrate  # noqa: E402
from poisson_dirac.pdctl.cli import main as cli  # noqa: E402
from poisson_dirac.pdctl.golden import verify  # noqa: E402
from poisson_dirac.poisson import max_jacobiator, pushforward_bivector  # noqa: E402
from poisson_dirac.rank_lab import (coregular_check, rank_identity_check, rank_scan,  # noqa: E402
                                    semicontinuity_check)
from poisson_dirac.reduction import dirac_bracket, pd_bracket_split, shifted_split  # noqa: E402
from poisson_dirac.submanifold import (check_pd_condition, check_transversal,  # noqa: E402
                                       constraint_blocks)

LV_POINTS = [(2, 3), (1, 1), (-1, 2), (0.5, 4), (3, -2)]


def seeded(dim, count, seed=0):
    # same sampler the CLI documents: default_rng(seed), uniform(-2, 2) per point
    rng = np.random.default_rng(seed)
    return [rng.uniform(-2.0, 2.0, dim) for _ in range(count)]


@pytest.fixture
def emit(capsys):
    def _emit(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  [{number:>2}] {title}: {detail}"
        with capsys.disabled():
            print("\n" + line, end="")
        assert ok, line
    return _emit


def run_cli(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli(argv)
    return code, buf.getvalue()


def test_01_lv_induced_bracket(emit):
    t0 = time.perf_counter()
    lv = builtin("lv4")
    pi2, S = shifted_split(lv.bivector, lv.constraint)
    worst_rel, worst_oracle = 0.0, 0.0
    for u, v in LV_POINTS:
        code, out = run_cli(["reduce", "--spec", "builtin:lv4", "--point", f"{u},{v}", "--method", "graph"])
        assert code == 0
        got = np.array(json.loads(out)["results"]["per_point"][0]["reduced_anchor"])
        worst_rel = max(worst_rel, abs(got[0, 1] - u * v) / abs(u * v))
        oracle = dirac_bracket(pi2, S, S.lift([u, v])).anchor
        worst_oracle = max(worst_oracle, np.max(np.abs(got - oracle)) / (1 + np.max(np.abs(oracle))))
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-9 and worst_oracle <= 1e-9 and elapsed < 1.0
    emit(1, "LV induced bracket {u,v}_N = uv", ok,
         f"max rel err {worst_rel:.1e}, vs Dirac oracle {worst_oracle:.1e}, {elapsed:.2f}s")


def test_02_jacobi_verification(emit):
    t0 = time.perf_counter()
    worst = {}
    for name in ("canonical2", "canonical4", "lv4", "so3"):
        pi = builtin(name).bivector
        worst[name] = max(max_jacobiator(pi, p)[0] for p in seeded(pi.chart.dim, 100))
    witness = max_jacobiator(builtin("nonpoisson3").bivector, [1, 1, 1])[0]
    elapsed = time.perf_counter() - t0
    ok = all(v <= 1e-10 for v in worst.values()) and witness >= 1 and elapsed < 5.0
    emit(2, "Jacobi verification", ok,
         f"max Poisson residual {max(worst.values()):.1e}, nonpoisson3(1,1,1) = {witness:g}, {elapsed:.2f}s")


def test_03_classification(emit):
    lv = builtin("lv4")
    pts = [lv.constraint.lift(x) for x in seeded(2, 49)] + [np.zeros(4)]
    pd_all = all(check_pd_condition(lv.bivector, lv.constraint, p).is_pd for p in pts)
    tr_one = check_transversal(lv.bivector, lv.constraint, [1, 1, 1, 1]).is_transversal
    tr_origin = check_transversal(lv.bivector, lv.constraint, np.zeros(4)).is_transversal
    lag = builtin("lagrangian4")
    lag_res = [check_pd_condition(lag.bivector, lag.constraint, lag.constraint.lift(x))
               for x in seeded(2, 20)]
    lag_ok = all(not r.is_pd and r.intersection_dim == 2 for r in lag_res)
    ok = pd_all and tr_one and not tr_origin and lag_ok
    emit(3, "Classification", ok,
         f"lv4 PD at 50 pts incl. origin={pd_all}, transversal(1,1,1,1)={tr_one}, "
         f"transversal(origin)={tr_origin}, Lagrangian non-PD dim 2 at 20 pts={lag_ok}")


def test_04_dirac_pd_oracle_equivalence(emit):
    worst = 0.0
    c4 = builtin("canonical4")
    fs = builtin("fastslow")
    pi_fs, S_fs = shifted_split(fs.bivector, fs.constraint)
    for pi, S in ((c4.bivector, c4.constraint), (pi_fs, S_fs)):
        for x in seeded(len(S.sigma_indices), 50):
            p = S.lift(x)
            d = dirac_bracket(pi, S, p).anchor
            pd = pd_bracket_split(pi, S, p).anchor
            worst = max(worst, np.max(np.abs(pd - d)) / (1 + np.max(np.abs(d))))
    code, out = run_cli(["reduce", "--spec", "builtin:kernel3", "--point", "0.5,0,0", "--method", "pd"])
    err = json.loads(out).get("error", {})
    nest_ok = code == 2 and err.get("type") == "KernelNestingViolated" and err.get("witness") is not None
    ok = worst <= 1e-9 and nest_ok
    emit(4, "Dirac/PD oracle equivalence", ok,
         f"max scaled diff {worst:.1e}; kernel3 exit {code} {err.get('type')} witness {err.get('witness')}")


def test_05_casimir_shortcut(emit):
    cas = builtin("casimir3")
    worst = 0.0
    methods = set()
    for x in seeded(2, 50):
        p = cas.constraint.lift(x)
        rep = pd_bracket_split(cas.bivector, cas.constraint, p)
        methods.add(rep.method)
        worst = max(worst, np.max(np.abs(rep.anchor - constraint_blocks(cas.bivector, cas.constraint, p)[0])))
    ok = worst <= 1e-12
    emit(5, "Casimir shortcut", ok, f"max deviation from sigma block {worst:.1e} ({', '.join(sorted(methods))})")


def test_06_fastslow_closed_form(emit):
    split = builtin("fastslow_split")
    inst = instantiate(builtin("fastslow").series, 0.1)
    doc = split.document["chart_map"]
    pi = pushforward_bivector(inst, doc["forward"], doc["inverse"], split.chart.names)
    got = dirac_bracket(pi, split.constraint, [1, 1, 0, 0]).anchor[0, 1]
    closed = 1 / (1 + 0.1**2 * 4)
    ok = abs(got - 0.9615384615) <= 1e-9 and abs(got - closed) <= 1e-12
    emit(6, "Fast-slow closed form", ok, f"{{q,p}}_red(1,1; eps=0.1) = {float(got)!r}")


def test_07_series_reduction(emit):
    t0 = time.perf_counter()
    fs = builtin("fastslow")
    p = fs.constraint.lift([1, 1])
    red = series_reduced_bivector(fs.series, fs.constraint, p, 4)
    coeffs = [float(red.coefficient(k)[0, 1]) for k in range(5)]
    # the criterion pins R0, R1, R2 and R4
    want = {0: 1.0, 1: 0.0, 2: -4.0, 4: 16.0}
    coeff_ok = all(abs(coeffs[k] - w) <= 1e-9 for k, w in want.items())

    def err(eps):
        trunc = series_reduced_bivector(fs.series, fs.constraint, p, 2).evaluate(eps, upto=2)
        # oracle: Dirac bracket of the eps-instantiated bivector in the shifted chart
        pi_eps, S = shifted_split(instantiate(fs.series, eps), fs.constraint)
        direct = dirac_bracket(pi_eps, S, S.lift([1, 1])).anchor
        return float(np.max(np.abs(direct - trunc)))

    rate = math.log2(err(1e-2) / err(5e-3))
    elapsed = time.perf_counter() - t0
    ok = coeff_ok and 2.7 <= rate <= 3.3 and elapsed < 5.0
    emit(7, "Series reduction", ok,
         f"R0..R4 = {[round(c, 12) for c in coeffs]}, K=2 log2 error ratio {rate:.4f} "
         f"(required [2.7, 3.3]), {elapsed:.2f}s")


def test_08_rank_identity_and_scan(emit):
    lv = builtin("lv4")
    pts = [lv.constraint.lift(x) for x in seeded(2, 20)]
    ids = [rank_identity_check(lv.bivector, lv.constraint, p) for p in pts]
    origin = rank_identity_check(lv.bivector, lv.constraint, np.zeros(4))
    id_ok = all(r.holds and r.lhs == 4 for r in ids) and origin.holds and origin.lhs == 0
    scan = rank_scan(lv.bivector, lv.constraint, ["t", "1", "t", "1"], np.linspace(-1, 1, 201))
    drops = [r for r in scan if r.drop_detected]
    drop_ok = (len(drops) == 1 and drops[0].t == 0.0 and drops[0].rank_reduced == 0
               and {r.rank_reduced for r in scan if r.t != 0.0} == {2})
    semi_ok = semicontinuity_check(scan).ok
    cor_with = coregular_check(lv.bivector, lv.constraint, pts + [np.zeros(4)]).coregular
    cor_without = coregular_check(lv.bivector, lv.constraint, pts).coregular
    ok = id_ok and drop_ok and semi_ok and not cor_with and cor_without
    emit(8, "Rank identity and scan", ok,
         f"identity at 20+origin={id_ok}, drops at t={[d.t for d in drops]}, semicontinuous={semi_ok}, "
         f"coregular with/without origin={cor_with}/{cor_without}")


def test_09_flow_diagnostics(emit):
    t0 = time.perf_counter()
    so3 = builtin("so3")
    traj = integrate(so3.bivector, so3.hamiltonian, [1, 1, 1], 1e-3, 10_000)
    cas, energy = conservation_report(traj, [ScalarField(so3.chart, "x1^2 + x2^2 + x3^2"), so3.hamiltonian])
    c2 = builtin("canonical2")
    osc = integrate(c2.bivector, c2.hamiltonian, [1, 0], 1e-3, 10_000).final
    osc_err = float(np.max(np.abs(osc - [math.cos(10), -math.sin(10)])))
    fs = builtin("fastslow")
    p0 = fs.constraint.lift([0.5, 0.3])
    gaps, drifts = [], []
    for eps in (0.1, 0.05, 0.025):
        res = compare_full_vs_reduced(fs.series, fs.constraint, fs.hamiltonian, p0, eps,
                                      1e-4, 100_000, order=4, reduced_stride=100)
        gaps.append(res.slow_variable_gap)
        drifts.append(res.constraint_drift)
    bounded = all(np.isfinite(gaps)) and all(np.isfinite(drifts))
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    elapsed = time.perf_counter() - t0
    ok = cas <= 1e-6 and energy <= 1e-6 and osc_err <= 1e-6 and bounded and monotone and elapsed < 30
    emit(9, "Flow diagnostics", ok,
         f"so3 drifts |x|^2 {cas:.1e} H {energy:.1e}, oscillator err {osc_err:.1e}, "
         f"slow gaps {', '.join(f'{g:.2e}' for g in gaps)}, {elapsed:.1f}s")


def test_10_determinism(emit):
    buf = io.StringIO()
    bad = verify(out=buf)
    emit(10, "Determinism", not bad, "all golden reports byte-identical" if not bad else f"differ: {bad}")


if __name__ == "__main__":
    import inspect

    failures = 0

    def plain_emit(number, title, ok, detail):
        print(f"{'PASS' if ok else 'FAIL'}  [{number:>2}] {title}: {detail}")
        if not ok:
            raise AssertionError

    for name, fn in sorted(inspect.getmembers(sys.modules[__name__], inspect.isfunction)):
        if name.startswith("test_"):
            try:
                fn(plain_emit)
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
