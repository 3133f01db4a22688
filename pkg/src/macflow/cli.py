"""``macflow`` command line: verify, converge, run."""
from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from .harness import run_convergence, run_single, run_verify
from .macgrid import GridError
from .problems import problem_names


def _int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _dt_law(text: str) -> float:
    """Parse ``c*h`` (or a bare number ``c``) into the factor ``c``."""
    m = re.fullmatch(r"\s*([0-9.eE+-]+)\s*(\*\s*h)?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"dt law must look like 0.25*h, got {text!r}")
    c = float(m.group(1))
    if c <= 0:
        raise argparse.ArgumentTypeError("dt law factor must be positive")
    return c


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the property verification suite")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--dims", type=_int_list, default=[2])
    v.add_argument("--sizes", type=_int_list, default=[4, 8, 16])
    v.add_argument("--samples", type=int, default=2, help="random grids per (dim, size)")
    v.add_argument("--csv", type=Path, help="also write the result table here")

    c = sub.add_parser("converge", help="manufactured-solution refinement study")
    c.add_argument("--problem", required=True, choices=problem_names())
    c.add_argument("--scheme", default="centred", choices=["centred", "centered", "upwind"])
    c.add_argument("--levels", type=int, default=4)
    c.add_argument("--base", type=int, default=8, help="cells per axis on the coarsest level")
    c.add_argument("--unsteady", action="store_true", default=None)
    c.add_argument("--dt-law", type=_dt_law, default=0.25, metavar="C*h")
    c.add_argument("--equations", default="navier-stokes", choices=["stokes", "navier-stokes"])
    c.add_argument("--graded", type=float, default=1.0, metavar="RATIO",
                   help="geometric stretching ratio (1 = uniform)")
    c.add_argument("--amplitude", type=float, default=1.0)
    c.add_argument("--csv", type=Path)

    r = sub.add_parser("run", help="single solve with CSV dumps")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--grid", type=Path)
    src.add_argument("--problem", choices=problem_names())
    r.add_argument("--convection", default="centred", choices=["centred", "centered", "upwind", "none"])
    r.add_argument("--cells", type=int, default=32)
    r.add_argument("--out", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        if any(s < 2 for s in args.sizes):
            print("error: sizes must be >= 2 cells per axis", file=sys.stderr)
            return 2
        result = run_verify(args.seed, args.sizes, args.dims, samples=args.samples)
        text = result.to_csv()
        sys.stdout.write(text)
        if args.csv:
            args.csv.write_text(text, encoding="utf-8", newline="\n")
        for name in result.missing:
            print(f"missing check for catalog entry {name}", file=sys.stderr)
        print(f"seed={result.seed} checks={len(result.records)} "
              f"{'PASS' if result.passed else 'FAIL'}", file=sys.stderr)
        return 0 if result.passed else 1

    if args.command == "converge":
        table = run_convergence(args.problem, args.scheme, args.levels, args.unsteady,
                                args.dt_law, args.graded, args.base, args.equations,
                                args.amplitude)
        text = table.to_csv()
        sys.stdout.write(text)
        if args.csv:
            args.csv.write_text(text, encoding="utf-8", newline="\n")
        if not table.complete:
            print(table.message, file=sys.stderr)
            return 1
        return 0

    equations = "stokes" if args.convection == "none" else "navier-stokes"
    scheme = "centred" if args.convection == "none" else args.convection
    try:
        result = run_single(args.problem, args.grid, scheme, args.out, equations, args.cells)
    except (GridError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rep = result.report
    print(f"kind={rep.kind} converged={str(rep.converged).lower()} "
          f"velocity_h1={rep.velocity_h1:.6g} pressure_l2={rep.pressure_l2:.6g}")
    for path in result.files:
        print(path)
    return 0 if rep.converged else 1


if __name__ == "__main__":
    sys.exit(main())
