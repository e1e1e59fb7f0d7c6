"""``pd <command> --spec <file|builtin:NAME> [options]``"""
from __future__ import annotations

import argparse
import re
import sys

from ..errors import PoissonDiracError
from .commands import COMMANDS, Flags, run_command
from .report import render
from .spec import builtin_names, load_spec


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _trange(text):
    vals = _floats(text)
    if len(vals) != 3 or vals[2] < 1 or not float(vals[2]).is_integer():
        raise argparse.ArgumentTypeError("--trange expects a,b,n with integer n >= 1")
    return vals[0], vals[1], int(vals[2])


def _path(text):
    return [s.strip() for s in text.split(",")]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True,
                        help=f"spec file or builtin:NAME ({', '.join(builtin_names())})")
    common.add_argument("--point", type=_floats, help="v1,v2,... (ambient or base coordinates)")
    common.add_argument("--grid", help="a,b,n per base axis, ';'-separated (one spec = all axes)")
    common.add_argument("--path", type=_path, help="comma-separated expressions in t")
    common.add_argument("--trange", type=_trange, help="a,b,n")
    common.add_argument("--order", type=int, default=4)
    common.add_argument("--epsilon", type=_floats, default=[], help="one or more comma-separated values")
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int)
    common.add_argument("--method", help="reduce: graph|dirac|pd; flow/compare: rk4|midpoint")
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--reduced-stride", type=int, default=100,
                        help="compare: reduced model step is dt * stride")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="pd", description="Poisson-Dirac constraint toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        sub.add_parser(cmd, parents=[common])
    return parser


def _join_negative_values(argv):
    # "--trange -1,1,5" would otherwise read "-1,1,5" as an option
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt is not None and re.match(r"^-[0-9.]", nxt):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    flags = Flags(point=args.point, grid=args.grid, path=args.path, trange=args.trange,
                  order=args.order, epsilon=args.epsilon, tol=args.tol, seed=args.seed,
                  samples=args.samples, method=args.method, dt=args.dt, steps=args.steps,
                  reduced_stride=args.reduced_stride, format=args.format)
    try:
        spec = load_spec(args.spec)
        report, code, text = run_command(args.command, spec, flags)
    except (PoissonDiracError, ValueError, OSError) as exc:
        print(f"pd: error: {exc}", file=sys.stderr)
        return 1
    payload = text if (args.format == "csv" and text is not None) else render(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return code


if __name__ == "__main__":
    sys.exit(main())
