"""Fixed-step integration of ``dx/dt = M(x) grad H(x)`` and drift diagnostics."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import MidpointNonConvergence, NonFiniteState
from .eps_series import DEFAULT_ORDER, ReducedSeriesField, instantiate
from .expr import ScalarField
from .poisson import BivectorField
from .reduction import reduce_hamiltonian
from .submanifold import as_graph, require_on

MIDPOINT_TOL = 1e-12
MIDPOINT_MAXITER = 50


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    method: str
    dt: float
    names: tuple = ()

    @property
    def final(self):
        return self.states[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.names])
        for t, x in zip(self.times, self.states):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in x)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"method": self.method, "dt": self.dt, "names": list(self.names),
                           "t": self.times.tolist(), "states": self.states.tolist()})


def hamiltonian_field_exprs(pi: BivectorField, H: ScalarField):
    """Component expressions of the Hamiltonian vector field."""
    n = pi.dim
    grad = [ex.differentiate(H.expr, v) for v in pi.chart.names]
    return [ex.sum_exprs(ex.mul(pi.entries[i][j], grad[j]) for j in range(n)
                         if not ex.is_zero(pi.entries[i][j]) and not ex.is_zero(grad[j]))
            for i in range(n)]


def _rk4_step(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _midpoint_step(f, x, dt, step):
    new = x + dt * f(x)
    inc = np.inf
    for _ in range(MIDPOINT_MAXITER):
        nxt = x + dt * f(0.5 * (x + new))
        inc = float(np.max(np.abs(nxt - new)))
        new = nxt
        if inc <= MIDPOINT_TOL * (1.0 + float(np.max(np.abs(new)))):
            return new
    raise MidpointNonConvergence(step, inc)


def integrate_field(f, p0, dt: float, steps: int, method: str = "rk4", names=()) -> Trajectory:
    """Integrate ``dx/dt = f(x)`` with a fixed step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if method not in ("rk4", "midpoint"):
        raise ValueError(f"unknown method {method!r}")
    x = np.asarray(p0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(0)
    states = np.empty((steps + 1, x.shape[0]))
    states[0] = x
    for k in range(1, steps + 1):
        x = _rk4_step(f, x, dt) if method == "rk4" else _midpoint_step(f, x, dt, k)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(k)
        states[k] = x
    return Trajectory(np.arange(steps + 1) * dt, states, method, dt, tuple(names))


def integrate(pi: BivectorField, H, p0, dt: float, steps: int, method: str = "rk4") -> Trajectory:
    H = H if isinstance(H, ScalarField) else ScalarField(pi.chart, H)
    fn = ex.compile_exprs(hamiltonian_field_exprs(pi, H), pi.chart.names)
    p0 = pi.chart.check_point(p0)
    return integrate_field(lambda x: np.array(fn(x)), p0, dt, steps, method, pi.chart.names)


def conservation_report(traj: Trajectory, fields) -> list:
    """Max over time of ``|f(x(t)) - f(x(0))|`` for each field."""
    out = []
    for f in fields:
        fn = ex.compile_exprs([f.expr], f.chart.names)
        vals = np.array([fn(x)[0] for x in traj.states])
        out.append(float(np.max(np.abs(vals - vals[0]))))
    return out


@dataclass
class ComparisonResult:
    constraint_drift: float
    slow_variable_gap: float
    full: Trajectory
    reduced: Trajectory


def reduced_flow(series, N, H: ScalarField, x0, epsilon, dt, steps, order=DEFAULT_ORDER, method="rk4"):
    """Flow of the pulled-back Hamiltonian under the truncated reduced bracket."""
    g = as_graph(N)
    h_red = reduce_hamiltonian(H, g)
    grad_fn = ex.compile_exprs([ex.differentiate(h_red.expr, v) for v in g.x_names], g.x_names)
    anchor = ReducedSeriesField(series, g, order, epsilon)

    def f(x):
        return anchor(x) @ np.array(grad_fn(x))

    return integrate_field(f, x0, dt, steps, method, g.x_names)


def compare_full_vs_reduced(series, N, H, p0, epsilon: float, dt: float, steps: int,
                            order: int = DEFAULT_ORDER, reduced_stride: int = 1,
                            method: str = "rk4") -> ComparisonResult:
    """Run the full instantiated system and the reduced model from the same start.

    The reduced model takes steps of ``dt * reduced_stride``; slow variables
    are compared on the shared time points.
    """
    g = as_graph(N)
    H = H if isinstance(H, ScalarField) else ScalarField(g.chart, H)
    p0 = g.chart.check_point(p0)
    require_on(g, p0)
    if steps % reduced_stride:
        raise ValueError("steps must be a multiple of reduced_stride")
    full = integrate(instantiate(series, epsilon), H, p0, dt, steps, method)
    x0 = p0[list(g.x_indices)]
    red = reduced_flow(series, g, H, x0, epsilon, dt * reduced_stride, steps // reduced_stride, order, method)
    xs = full.states[:, list(g.x_indices)]
    ys = full.states[:, list(g.y_indices)]
    drift = max(float(np.max(np.abs(y - g.y0_at(x)))) for x, y in zip(xs, ys))
    gap = float(np.max(np.abs(xs[::reduced_stride] - red.states)))
    return ComparisonResult(drift, gap, full, red)
