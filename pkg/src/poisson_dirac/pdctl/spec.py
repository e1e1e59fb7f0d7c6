"""Loading and validating system specification files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .. import expr as ex
from ..eps_series import EpsBivectorSeries, ReservedNameError, RESERVED
from ..errors import BindingError, ExprError, SpecError
from ..expr import CoordinateChart, ScalarField
from ..poisson import BivectorField, pushforward_bivector
from ..submanifold import GraphSubmanifold, SplitConstraint

BUILTIN_PREFIX = "builtin:"


def _resource(name):
    return resources.files("poisson_dirac.pdctl").joinpath(name)


def schema() -> dict:
    return json.loads(_resource("schema.json").read_text(encoding="utf-8"))


def builtin_names():
    folder = _resource("builtins")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


@dataclass
class SystemSpec:
    name: str
    source: str
    chart: CoordinateChart
    bivector: BivectorField
    document: dict
    hamiltonian: ScalarField | None = None
    invariants: list = field(default_factory=list)
    constraint: GraphSubmanifold | SplitConstraint | None = None
    series: EpsBivectorSeries | None = None


def _parse(text, path):
    try:
        return ex.parse(text)
    except ExprError as exc:
        raise SpecError(str(exc), path) from None


def _bind(node, names, path):
    unbound = ex.free_vars(node) - set(names)
    if unbound:
        raise SpecError(f"unknown identifier(s) {', '.join(sorted(unbound))}", path)
    return node


def _bivector_from_map(chart, mapping, path):
    upper = {}
    for key, text in mapping.items():
        kpath = f"{path}/{key}"
        parts = [s.strip() for s in key.split(",")]
        idx = []
        for part in parts:
            if part.isdigit():
                k = int(part) - 1
                if not 0 <= k < chart.dim:
                    raise SpecError(f"index {part} out of range 1..{chart.dim}", kpath)
            elif part in chart:
                k = chart.index(part)
            else:
                raise SpecError(f"unknown coordinate {part!r} in key", kpath)
            idx.append(k)
        i, j = idx
        if i == j:
            raise SpecError("diagonal entries are forbidden (the bivector is skew)", kpath)
        if i > j:
            raise SpecError("only upper-triangle keys (i < j in coordinate order) are allowed", kpath)
        if (i, j) in upper:
            raise SpecError("duplicate entry", kpath)
        node = _parse(text, kpath)
        if RESERVED in ex.free_vars(node) and RESERVED not in chart:
            raise ReservedNameError(f"{kpath}: coefficients must not depend on {RESERVED!r}")
        upper[(i, j)] = _bind(node, chart.names, kpath)
    return BivectorField.from_upper(chart, upper)


def validate_document(doc, source="<spec>"):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "(root)"
        raise SpecError(f"schema violation: {err.message}", f"{source}:{path}")


def build_spec(doc: dict, source: str = "<spec>") -> SystemSpec:
    validate_document(doc, source)
    try:
        chart = CoordinateChart(doc["coordinates"])
    except ValueError as exc:
        raise SpecError(str(exc), "coordinates") from None
    pi = _bivector_from_map(chart, doc["bivector"], "bivector")

    series = None
    if "epsilon_series" in doc:
        es = doc["epsilon_series"]
        coeffs = [_bivector_from_map(chart, m, f"epsilon_series/coefficients/{k}")
                  for k, m in enumerate(es["coefficients"])]
        series = EpsBivectorSeries(coeffs, es.get("scale_exponent", 2))

    def scalar(text, path, on_chart):
        return ScalarField(on_chart, _bind(_parse(text, path), on_chart.names, path))

    ham = scalar(doc["hamiltonian"], "hamiltonian", chart) if "hamiltonian" in doc else None
    invariants = [scalar(t, f"invariants/{k}", chart) for k, t in enumerate(doc.get("invariants", []))]

    if "chart_map" in doc:
        cm = doc["chart_map"]
        try:
            new_chart = CoordinateChart(cm["coordinates"])
        except ValueError as exc:
            raise SpecError(str(exc), "chart_map/coordinates") from None
        fwd = [_bind(_parse(t, f"chart_map/forward/{k}"), chart.names, f"chart_map/forward/{k}")
               for k, t in enumerate(cm["forward"])]
        inv = [_bind(_parse(t, f"chart_map/inverse/{k}"), new_chart.names, f"chart_map/inverse/{k}")
               for k, t in enumerate(cm["inverse"])]
        if len(fwd) != chart.dim or len(inv) != chart.dim or new_chart.dim != chart.dim:
            raise SpecError("forward, inverse and coordinates need one entry per coordinate", "chart_map")
        try:
            pi = pushforward_bivector(pi, fwd, inv, new_chart.names)
        except Exception as exc:  # round-trip failures carry their own message
            raise SpecError(str(exc), "chart_map") from None
        back = dict(zip(chart.names, inv))
        if ham is not None:
            ham = ScalarField(new_chart, ex.substitute(ham.expr, back))
        invariants = [ScalarField(new_chart, ex.substitute(f.expr, back)) for f in invariants]
        if series is not None:
            series = EpsBivectorSeries(
                [pushforward_bivector(c, fwd, inv, new_chart.names) for c in series.coefficients],
                series.scale_exponent)
        chart = new_chart

    constraint = None
    if "constraint" in doc:
        c = doc["constraint"]
        try:
            if c["kind"] == "graph":
                for k, name in enumerate(c["x"] + c["y"]):
                    if name not in chart:
                        raise SpecError(f"unknown coordinate {name!r}", "constraint")
                y0 = [_bind(_parse(t, f"constraint/y0/{k}"), c["x"], f"constraint/y0/{k}")
                      for k, t in enumerate(c["y0"])]
                constraint = GraphSubmanifold(chart, c["x"], c["y"], y0)
            else:
                for name in c["sigma"] + c["c"]:
                    if name not in chart:
                        raise SpecError(f"unknown coordinate {name!r}", "constraint")
                constraint = SplitConstraint(chart, c["sigma"], c["c"])
        except (ValueError, BindingError) as exc:
            raise SpecError(str(exc), "constraint") from None

    return SystemSpec(doc["name"], source, chart, pi, doc, ham, invariants, constraint, series)


def read_document(path: str) -> tuple[dict, str]:
    if path.startswith(BUILTIN_PREFIX) or (not Path(path).exists() and path in builtin_names()):
        name = path[len(BUILTIN_PREFIX):] if path.startswith(BUILTIN_PREFIX) else path
        if name not in builtin_names():
            raise SpecError(f"no builtin named {name!r} (have: {', '.join(builtin_names())})")
        text = _resource("builtins").joinpath(name + ".json").read_text(encoding="utf-8")
        source = BUILTIN_PREFIX + name
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise FileNotFoundError(f"cannot read spec {path!r}: {exc.strerror}") from None
        source = path
    try:
        return json.loads(text), source
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}", source) from None


def load_spec(path: str) -> SystemSpec:
    """Load a spec file or ``builtin:NAME`` and validate it fully."""
    doc, source = read_document(path)
    return build_spec(doc, source)
