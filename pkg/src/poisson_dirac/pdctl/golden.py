"""Golden reports for the builtin examples.

``python -m poisson_dirac.pdctl.golden regenerate|verify [DIR]`` reruns
each command below and writes or byte-compares its report.
"""
from __future__ import annotations

import contextlib
import difflib
import io
import sys
from pathlib import Path

from .cli import main as cli_main

DEFAULT_DIR = Path(__file__).resolve().parents[3] / "golden"

# (file stem, argv, expected exit code)
CASES = [
    ("canonical2_jacobi", ["check-jacobi", "--spec", "builtin:canonical2", "--samples", "100"], 0),
    ("canonical2_flow", ["flow", "--spec", "builtin:canonical2", "--point", "1,0",
                         "--dt", "1e-3", "--steps", "10000"], 0),
    ("canonical4_jacobi", ["check-jacobi", "--spec", "builtin:canonical4", "--samples", "100"], 0),
    ("canonical4_classify", ["classify", "--spec", "builtin:canonical4", "--samples", "10"], 0),
    ("canonical4_reduce_pd", ["reduce", "--spec", "builtin:canonical4", "--point", "0.3,-0.7,0,0",
                              "--method", "pd"], 0),
    ("lagrangian4_classify", ["classify", "--spec", "builtin:lagrangian4", "--samples", "20"], 0),
    ("lv4_jacobi", ["check-jacobi", "--spec", "builtin:lv4", "--samples", "100"], 0),
    ("lv4_classify_regular", ["classify", "--spec", "builtin:lv4", "--point", "1,1,1,1"], 0),
    ("lv4_classify_origin", ["classify", "--spec", "builtin:lv4", "--point", "0,0,0,0"], 0),
    ("lv4_reduce_graph", ["reduce", "--spec", "builtin:lv4", "--point", "2,3", "--method", "graph"], 0),
    ("lv4_reduce_dirac", ["reduce", "--spec", "builtin:lv4", "--point", "2,3", "--method", "dirac"], 0),
    ("lv4_rank_scan", ["rank-scan", "--spec", "builtin:lv4", "--path", "t,1,t,1",
                       "--trange", "-1,1,201"], 0),
    ("so3_jacobi", ["check-jacobi", "--spec", "builtin:so3", "--samples", "100"], 0),
    ("so3_flow", ["flow", "--spec", "builtin:so3", "--point", "1,1,1",
                  "--dt", "1e-3", "--steps", "10000"], 0),
    ("fastslow_reduce", ["reduce", "--spec", "builtin:fastslow", "--point", "1,1"], 0),
    ("fastslow_series", ["series-reduce", "--spec", "builtin:fastslow", "--point", "1,1",
                         "--order", "4", "--epsilon", "0.01,0.005"], 0),
    ("fastslow_compare", ["compare", "--spec", "builtin:fastslow", "--point", "0.5,0.3",
                          "--epsilon", "0.1,0.05", "--dt", "1e-4", "--steps", "20000"], 0),
    ("fastslow_split_pd", ["reduce", "--spec", "builtin:fastslow_split", "--point", "1,1,0,0",
                           "--method", "pd"], 0),
    ("nonpoisson3_jacobi", ["check-jacobi", "--spec", "builtin:nonpoisson3", "--samples", "100",
                            "--seed", "7"], 2),
    ("kernel3_reduce", ["reduce", "--spec", "builtin:kernel3", "--point", "0.5,0,0",
                        "--method", "pd"], 2),
    ("casimir3_reduce", ["reduce", "--spec", "builtin:casimir3", "--point", "0.5,0.5,0",
                         "--method", "pd"], 0),
]


def run_case(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli_main(argv)
    return code, buf.getvalue()


def regenerate(folder=DEFAULT_DIR):
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    for stem, argv, expected in CASES:
        code, text = run_case(argv)
        if code != expected:
            raise SystemExit(f"{stem}: exit {code}, expected {expected}")
        (folder / f"{stem}.json").write_text(text, encoding="utf-8", newline="\n")
    return len(CASES)


def verify(folder=DEFAULT_DIR, out=sys.stdout):
    """Rerun every case; returns the list of stems that differ."""
    folder = Path(folder)
    bad = []
    for stem, argv, expected in CASES:
        path = folder / f"{stem}.json"
        code, text = run_case(argv)
        want = path.read_text(encoding="utf-8") if path.exists() else None
        if code != expected or text != want:
            bad.append(stem)
            print(f"FAIL {stem} (exit {code}, expected {expected})", file=out)
            if want is not None:
                diff = difflib.unified_diff(want.splitlines(), text.splitlines(),
                                            "golden", "rerun", lineterm="", n=1)
                for line in list(diff)[:20]:
                    print("  " + line, file=out)
        else:
            print(f"ok   {stem}", file=out)
    return bad


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in ("regenerate", "verify"):
        print("usage: python -m poisson_dirac.pdctl.golden regenerate|verify [DIR]", file=sys.stderr)
        return 1
    folder = Path(argv[1]) if len(argv) > 1 else DEFAULT_DIR
    if argv[0] == "regenerate":
        print(f"wrote {regenerate(folder)} golden reports to {folder}")
        return 0
    return 1 if verify(folder) else 0


if __name__ == "__main__":
    sys.exit(main())
