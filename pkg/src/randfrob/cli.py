"""Command-line interface: validate, solve, evaluate statistics, simulate.

Subcommands
    check    <spec> [--json]                     hypothesis verdicts
    solve    <spec> [--order N] [--out PATH]     coefficient dump CSV
    stats    <spec> --grid A:B:STEP [...]        exact mean/variance CSV
    mc       <spec> --method series|rk4 [...]    Monte Carlo CSV with CIs
    compare  <a.csv> <b.csv>                     deviation report
    majorant <spec> --s S [--order K] [...]      majorant sequence CSV

Exit status: 0 success, 1 validation failure, 2 usage error.  CSV output
uses 6 significant digits by default (--full-precision for shortest
round-trip floats) and is byte-identical across repeat runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from .errors import RandfrobError, SpecError
from .frobenius import ProblemSpec, build_problem, compute_coeffs, validate_hypotheses
from .mcengine import McConfig, compare_curves, mc_rk4, mc_series
from .poly import format_poly, to_fraction
from .specfile import load_document, resolve_problem
from .uqstats import StatCurve, majorant_sequence, moment_matrix, stat_curves

GRID_SLACK = Fraction(1, 10**12)


def _fmt(x: float, full: bool) -> str:
    return repr(float(x)) if full else f"{float(x):.6g}"


def parse_grid(text: str) -> list[Fraction]:
    """Parse "start:end:step" into exact rationals, inclusive of both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise SpecError(f"grid must be start:end:step, got {text!r}")
    try:
        start, end, step = (to_fraction(p) for p in parts)
    except SpecError:
        raise SpecError(f"grid bounds must be rationals, got {text!r}") from None
    if step <= 0:
        raise SpecError(f"grid step must be positive, got {step}")
    if end < start:
        raise SpecError(f"grid end {end} precedes start {start}")
    grid = []
    t = start
    while t <= end + GRID_SLACK:
        grid.append(t)
        t += step
    return grid


def _load_spec(arg: str) -> ProblemSpec:
    return build_problem(load_document(resolve_problem(arg)))


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_curve(path: str, curve: StatCurve, full: bool) -> None:
    header = ["t", "mean", "variance"]
    if curve.ci_halfwidth is not None:
        header.append("ci_halfwidth")
    rows = []
    for i, t in enumerate(curve.grid):
        row = [_fmt(t, full), _fmt(curve.mean[i], full), _fmt(curve.variance[i], full)]
        if curve.ci_halfwidth is not None:
            row.append(_fmt(curve.ci_halfwidth[i], full))
        rows.append(row)
    _write_csv(path, header, rows)


def read_curve(path: str) -> StatCurve:
    """Read a stats/mc CSV back into a curve."""
    try:
        with open(path, newline="") as fp:
            reader = csv.DictReader(fp)
            fields = reader.fieldnames or []
            if not {"t", "mean", "variance"}.issubset(fields):
                raise SpecError(f"{path}: expected columns t, mean, variance")
            has_ci = "ci_halfwidth" in fields
            grid, mean, var, hw = [], [], [], []
            for row in reader:
                grid.append(float(row["t"]))
                mean.append(float(row["mean"]))
                var.append(float(row["variance"]))
                if has_ci:
                    hw.append(float(row["ci_halfwidth"]))
    except OSError as exc:
        raise SpecError(f"cannot read curve file {path}: {exc}") from exc
    return StatCurve(
        grid=grid, mean=mean, variance=var,
        ci_halfwidth=hw if has_ci else None, label=Path(path).name,
    )


def _cmd_check(args) -> int:
    spec = _load_spec(args.spec)
    report = validate_hypotheses(spec)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"status: {report.status}")
        est = report.radius_estimate
        print(f"radius estimate: {'inf' if math.isinf(est) else f'{est:.6g}'}"
              f" (declared {'inf' if math.isinf(report.declared_radius) else f'{report.declared_radius:.6g}'})")
        for c in report.coefficient_checks:
            tag = "ok" if c.bounded else "UNBOUNDED"
            print(f"  {c.series}_{c.index}: sup bound {c.sup_bound:.6g} [{tag}]")
        for c in report.l2_checks:
            tag = "ok" if c.finite else "INFINITE"
            print(f"  {c.label}: mean-square norm {c.norm:.6g} [{tag}]")
        for msg in report.messages:
            print(f"note: {msg}")
    return 0 if report.status != "fail" else 1


def _cmd_solve(args) -> int:
    spec = _load_spec(args.spec)
    order = args.order or spec.default_order
    sol = compute_coeffs(spec, order)
    rows = [[n, format_poly(p, spec.table)] for n, p in enumerate(sol.X)]
    _write_csv(args.out, ["n", "polynomial"], rows)
    print(f"wrote {len(rows)} coefficients to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    spec = _load_spec(args.spec)
    order = args.order or spec.default_order
    grid = parse_grid(args.grid)
    sol = compute_coeffs(spec, order)
    mm = moment_matrix(sol, spec.model)
    curve = stat_curves(mm, grid, spec.t0, radius=float(spec.radius), label=f"series[N={order}]")
    _write_curve(args.out, curve, args.full_precision)
    print(f"wrote {len(curve.grid)} rows to {args.out}")
    return 0


def _cmd_mc(args) -> int:
    spec = _load_spec(args.spec)
    order = args.order or spec.default_order
    grid = [float(t) for t in parse_grid(args.grid)]
    cfg = McConfig(
        samples=args.samples,
        seed=args.seed,
        method=args.method,
        rk4_step=args.step,
        input_truncation=args.input_truncation,
    )
    if args.method == "series":
        sol = compute_coeffs(spec, order)
        curve = mc_series(sol, spec.model, grid, cfg)
    else:
        curve = mc_rk4(spec, spec.model, grid, cfg)
    _write_curve(args.out, curve, args.full_precision)
    print(f"wrote {len(curve.grid)} rows to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    report = compare_curves(read_curve(args.a), read_curve(args.b))
    print(report.summary())
    return 0


def _cmd_majorant(args) -> int:
    spec = _load_spec(args.spec)
    order = args.order or 2 * spec.default_order
    maj = majorant_sequence(spec, args.s, order)
    rows = [
        [n, _fmt(h, args.full_precision), _fmt(h * maj.s**n, args.full_precision)]
        for n, h in enumerate(maj.h)
    ]
    _write_csv(args.out, ["n", "H_n", "H_n_s_n"], rows)
    print(
        f"wrote {len(rows)} majorant terms to {args.out}"
        f" (s={maj.s:g}, D_s={maj.d_s:.6g}, inputs seen up to index {maj.input_max_index})"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randfrob",
        description="Series solutions and statistics for random second-order linear ODEs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_spec(p):
        p.add_argument("spec", help="problem file path or bundled problem name")

    p = sub.add_parser("check", help="validate solvability hypotheses")
    add_spec(p)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("solve", help="compute series coefficients")
    add_spec(p)
    p.add_argument("--order", type=int, default=None, help="truncation order N")
    p.add_argument("--out", default="coeffs.csv")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("stats", help="exact mean/variance on a grid")
    add_spec(p)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--grid", required=True, help="start:end:step, inclusive")
    p.add_argument("--out", default="stats.csv")
    p.add_argument("--full-precision", action="store_true")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("mc", help="Monte Carlo statistics on a grid")
    add_spec(p)
    p.add_argument("--method", choices=("series", "rk4"), required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-3, help="RK4 step size")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--input-truncation", type=int, default=None)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", default="mc.csv")
    p.add_argument("--full-precision", action="store_true")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("compare", help="deviation report between two curve CSVs")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("majorant", help="dominating sequence for truncation error")
    add_spec(p)
    p.add_argument("--s", type=float, required=True, help="scale 0 < s < radius")
    p.add_argument("--order", type=int, default=None, help="highest majorant index K")
    p.add_argument("--out", default="majorant.csv")
    p.add_argument("--full-precision", action="store_true")
    p.set_defaults(func=_cmd_majorant)
    return parser


def run_command(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and usage errors (2)
        return int(exc.code or 0)
    try:
        return args.func(args)
    except RandfrobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
