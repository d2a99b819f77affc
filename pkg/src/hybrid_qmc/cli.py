"""``hybrid-qmc`` command line.

Exit codes: 0 success, 1 a bound or validation check failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bounds import (
    bernstein_monte_carlo,
    halton_subseq_bound,
    subsequence_sqrt_bound,
    verify_battery,
)
from .cover import (
    build_cover,
    cover_discrepancy_interval,
    dyadic_snap_cover,
    snapped_size_bound,
    validate_cover,
)
from .discrepancy import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    grid_work,
    star_discrepancy_1d,
    star_discrepancy_exact,
    subsequence,
)
from .experiment import GENERATORS, emit_report, make_points, parse_spec, run_experiment
from .integrate import FUNCTION_NAMES, get_function, kh_certificate
from .pointfile import cell_text, digit_sidecar, read_csv, write_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {text!r}") from None


def _globals() -> argparse.ArgumentParser:
    # SUPPRESS lets the same flag appear before or after the subcommand
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output path (default stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
    g.add_argument("--budget", type=int, default=argparse.SUPPRESS,
                   help=f"max grid corners for exact discrepancy (default {DEFAULT_BUDGET})")
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _globals()
    p = argparse.ArgumentParser(prog="hybrid-qmc", parents=[common],
                                description="Hybrid low-discrepancy point sets and certified discrepancy.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def gen_flags(sp):
        sp.add_argument("--gen", choices=GENERATORS, default="hybrid-practical")
        sp.add_argument("--d", type=int, required=True)
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--bases", type=_int_list, help="Halton bases (default: first d odd primes)")
        sp.add_argument("--H", type=int, default=64, help="random digits per starting coordinate")

    g = sub.add_parser("generate", parents=[common], help="write a point set as CSV (or JSON)")
    gen_flags(g)
    g.add_argument("--exact", action="store_true", help="also write <out>.digits.json with digits and tapes")

    d = sub.add_parser("disc", parents=[common], help="star discrepancy of a point CSV")
    d.add_argument("file", help="point CSV, '-' for stdin")
    mode = d.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact value (default)")
    mode.add_argument("--interval", type=_fraction, metavar="DELTA", help="certified interval of width DELTA")

    s = sub.add_parser("subseq", parents=[common], help="discrepancy of residue-class subsequences")
    s.add_argument("file")
    s.add_argument("--kappa", type=int, required=True)
    s.add_argument("--gamma", type=int, help="one residue (default: all)")

    c = sub.add_parser("cover", parents=[common], help="build, snap and validate bracketing covers")
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--delta", type=_fraction, required=True)
    c.add_argument("--snap", type=int, metavar="H",
                   help="snap a 2^-(H+2) cover (or finer, per --delta) to a 2^-H cover on dyadic grids")
    c.add_argument("--validate", type=int, metavar="SAMPLES", help="validate with this many random points")

    v = sub.add_parser("verify", parents=[common], help="run the constant and tail-bound battery")
    v.add_argument("--quick", action="store_true", help="smaller sweeps and Monte Carlo")

    i = sub.add_parser("integrate", parents=[common], help="QMC average with a Koksma-Hlawka certificate")
    i.add_argument("--fn", required=True, help=f"one of {', '.join(FUNCTION_NAMES)} (box:b1,b2,...)")
    gen_flags(i)
    i.add_argument("--interval", type=_fraction, metavar="DELTA",
                   help="use a cover interval instead of the exact discrepancy")

    e = sub.add_parser("experiment", parents=[common], help="run an experiment spec file")
    e.add_argument("spec")
    e.add_argument("--workers", type=int, default=1)
    return p


def _emit(text: str | bytes, out: str | None) -> None:
    if isinstance(text, bytes):
        text = text.decode()
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _read_points(path: str):
    if path == "-":
        return read_csv(sys.stdin)
    try:
        with open(path) as fh:
            return read_csv(fh)
    except OSError as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(a) -> int:
    P = make_points(a.gen, a.d, a.n, a.seed, a.bases, a.H)
    if a.format == "json":
        doc = {"d": P.d, "n": P.N, "mode": a.gen, "seed": a.seed,
               "points": [[cell_text(c) for c in row] for row in P.points]}
        _emit(_json(doc), a.out)
    else:
        buf = io.StringIO()
        write_csv(P, buf, a.gen, a.seed)
        _emit(buf.getvalue(), a.out)
    if a.exact:
        if not a.out:
            raise UsageError("--exact needs --out (the sidecar is written next to it)")
        Path(f"{a.out}.digits.json").write_text(digit_sidecar(P, a.gen, a.seed))
    return EXIT_OK


def cmd_disc(a) -> int:
    P, _ = _read_points(a.file)
    if a.interval is not None:
        iv = cover_discrepancy_interval(P, a.interval)
        _emit(_json(iv.to_dict()), a.out)
        return EXIT_OK
    try:
        res = star_discrepancy_1d(P) if P.d == 1 else star_discrepancy_exact(P, budget=a.budget)
    except BudgetExceeded as exc:
        raise UsageError(f"{exc}; rerun with --interval DELTA or a larger --budget") from None
    _emit(_json(res.to_dict()), a.out)
    return EXIT_OK


def cmd_subseq(a) -> int:
    P, _ = _read_points(a.file)
    gammas = [a.gamma] if a.gamma is not None else range(1 << a.kappa)
    rows, ok = [], True
    for gamma in gammas:
        sub = subsequence(P, a.kappa, gamma)
        row = {"kappa": a.kappa, "gamma": gamma, "n_sub": sub.N}
        if sub.N:
            if grid_work(sub) > a.budget:
                raise UsageError(f"subsequence grid exceeds --budget {a.budget}")
            value = star_discrepancy_exact(sub, budget=a.budget).value
            bound = halton_subseq_bound(P.d, P.N, sub.N) if P.N >= 2 else None
            passed = None if bound is None else bool(value <= bound)
            row.update(value=float(value), value_exact=str(value), bound=bound, **{"pass": passed})
            if P.d >= 2:
                # large-N bound, reported for reference only
                sq = subsequence_sqrt_bound(P.d, sub.N)
                row.update(sqrt_bound=sq, sqrt_bound_holds=bool(value <= sq))
            ok &= passed is not False
        rows.append(row)
    _emit(_json(rows), a.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_cover(a) -> int:
    if a.snap is not None:
        if a.snap < 1:
            raise UsageError("--snap must be >= 1")
        # snapping needs a source cover at 2^-(h+2); a finer --delta is kept
        source = build_cover(a.d, min(a.delta, Fraction(1, 2 ** (a.snap + 2))), dyadic=True)
        cover = dyadic_snap_cover(source, a.snap)
        size_bound = snapped_size_bound(a.d, a.snap)
    else:
        cover = build_cover(a.d, a.delta)
        size_bound = cover.info["size_bound"]
    max_w, _ = cover.max_weight()
    doc = {
        "d": a.d,
        "delta": str(cover.delta),
        "count": len(cover),
        "max_weight": float(max_w),
        "max_weight_exact": str(max_w),
        "size_bound": size_bound,
        "bound_met": len(cover) <= size_bound,
        "failures": None,
    }
    code = EXIT_OK
    if a.validate is not None:
        report = validate_cover(cover, cover.delta, samples=a.validate, seed=a.seed)
        doc["failures"] = report.failures
        doc["validation"] = report.to_dict()
        code = EXIT_OK if report.ok else EXIT_FAIL
    _emit(_json(doc), a.out)
    return code


def cmd_verify(a) -> int:
    if a.quick:
        reports = verify_battery(series_max=1000, prime_max=1000, eps_grid=100)
        reports += bernstein_monte_carlo(trials=10_000, seed=a.seed)
    else:
        reports = verify_battery() + bernstein_monte_carlo(seed=a.seed)
    _emit(_json([r.to_dict() for r in reports]), a.out)
    return EXIT_OK if all(r.passed is not False for r in reports) else EXIT_FAIL


def cmd_integrate(a) -> int:
    f = get_function(a.fn, a.d)
    P = make_points(a.gen, a.d, a.n, a.seed, a.bases, a.H)
    if a.interval is not None:
        dstar = cover_discrepancy_interval(P, a.interval).hi
        method = f"interval({a.interval})"
    else:
        try:
            dstar = star_discrepancy_exact(P, budget=a.budget).value
        except BudgetExceeded as exc:
            raise UsageError(f"{exc}; rerun with --interval DELTA") from None
        method = "exact"
    report = kh_certificate(f, P, min(dstar, 1))
    doc = report.to_dict()
    doc["inputs"].update(generator=a.gen, seed=a.seed, dstar_method=method)
    _emit(_json(doc), a.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_experiment(a) -> int:
    try:
        text = Path(a.spec).read_text()
    except OSError as exc:
        raise UsageError(str(exc)) from None
    spec = parse_spec(text)
    if a.budget != DEFAULT_BUDGET:
        spec = replace(spec, budget=a.budget)
    if a.out:
        spec = replace(spec, output=a.out)
    report = run_experiment(spec, workers=a.workers)
    if not spec.output:
        _emit(emit_report(report, a.format), None)
    else:
        agg = report.aggregate
        sys.stderr.write(f"{agg['rows']} rows, {agg['passed']}/{agg['judged']} passed, "
                         f"{agg['skipped']} skipped; max normalized {agg['max_normalized']}\n")
    return EXIT_OK if report.all_passed else EXIT_FAIL


COMMANDS = {
    "generate": cmd_generate,
    "disc": cmd_disc,
    "subseq": cmd_subseq,
    "cover": cmd_cover,
    "verify": cmd_verify,
    "integrate": cmd_integrate,
    "experiment": cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    defaults = {"seed": 0, "out": None, "format": None, "budget": DEFAULT_BUDGET}
    for k, v in defaults.items():
        if not hasattr(a, k):
            setattr(a, k, v)
    if a.format is None:
        a.format = "csv" if a.command in ("generate", "experiment") else "json"
    try:
        return COMMANDS[a.command](a)
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"hybrid-qmc {a.command}: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
