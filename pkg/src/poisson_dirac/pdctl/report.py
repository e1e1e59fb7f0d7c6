"""Deterministic JSON rendering of reports."""
import json
import math

import numpy as np

TOOL = "poisson-dirac"
VERSION = "0.1.0"


def clean(obj):
    """Plain JSON types; ``-0.0`` becomes ``0.0``, non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return v + 0.0
    return obj


def render(report: dict) -> str:
    # json uses repr() for floats: the shortest string that round-trips
    return json.dumps(clean(report), indent=2, ensure_ascii=False) + "\n"


def make_report(command, inputs, tolerances, results, verdict, error=None):
    out = {
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "inputs": inputs,
        "tolerances": tolerances,
        "verdict": verdict,
        "results": results,
    }
    if error is not None:
        out["error"] = error
    return out
