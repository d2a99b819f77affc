"""Acceptance suite: one test per criterion, each at its stated tolerance and
time limit.  Every test prints a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or as a script.
"""
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from hybrid_qmc.bounds import bernstein_monte_carlo, halton_subseq_bound, verify_battery
from hybrid_qmc.cover import build_cover, cover_discrepancy_interval, dyadic_snap_cover, validate_cover
from hybrid_qmc.discrepancy import (
    compose_bound,
    range_discrepancy,
    star_discrepancy_1d,
    star_discrepancy_exact,
    subsequence,
)
from hybrid_qmc.experiment import make_points, parse_spec, run_experiment
from hybrid_qmc.integrate import builtin_suite, kh_certificate
from hybrid_qmc.pointgen import (
    ExactCoordinate,
    PointSet,
    hybrid_matrix,
    kakutani_step,
    radical_inverse,
    randomized_halton,
)

F = Fraction


# collected for the terminal summary (see conftest.py)
LINES: list[str] = []


@pytest.fixture
def announce(capsys):
    def emit(number, title, ok, elapsed, limit, detail=""):
        verdict = "PASS" if ok and elapsed < limit else "FAIL"
        line = f"criterion {number:>2} {verdict}  {title}  ({elapsed:.1f}s of {limit:.0f}s) {detail}".rstrip()
        LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return verdict == "PASS"

    return emit


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def random_rationals(rng, n, d):
    # small denominators force ties and shared coordinates
    den = int(rng.choice([n, 2 * n + 1, 97, 1024]))
    return [tuple(F(int(k), den) for k in row) for row in rng.integers(0, den, size=(n, d))]


# 1

def criterion_1():
    rng = np.random.default_rng(1)
    mismatches = 0
    for _ in range(500):
        P = PointSet.from_rows(random_rationals(rng, int(rng.integers(1, 257)), 1))
        mismatches += star_discrepancy_1d(P).value != star_discrepancy_exact(P).value
    return mismatches == 0, f"mismatches={mismatches}"


def test_criterion_1_1d_formula_equals_grid(announce):
    (ok, detail), t = timed(criterion_1)
    assert announce(1, "1-D formula == grid enumeration, 500 sets", ok, t, 10, detail)


# 2

def criterion_2():
    bad = 0
    for p in (3, 5, 7):
        x = ExactCoordinate.zero(p)
        for n in range(1, 10_001):
            x = kakutani_step(x)
            r = radical_inverse(n, p)
            strip = lambda ds: tuple(ds[: max((i + 1 for i, a in enumerate(ds) if a), default=0)])
            bad += strip(x.digits) != strip(r.digits)
    return bad == 0, f"digit mismatches={bad}"


def test_criterion_2_kakutani_orbit_is_radical_inverse(announce):
    (ok, detail), t = timed(criterion_2)
    assert announce(2, "Kakutani orbit == radical inverse, p in {3,5,7}, n <= 10^4", ok, t, 5, detail)


# 3

def criterion_3():
    N, violations, checked, worst = 4096, 0, 0, 0.0
    for seed in range(50):
        P = randomized_halton([3, 5], N, seed)
        for kappa in range(4):
            for gamma in range(2**kappa):
                sub = subsequence(P, kappa, gamma)
                value = star_discrepancy_exact(sub).value
                bound = halton_subseq_bound(2, N, sub.N)
                violations += value > bound
                worst = max(worst, float(value) / bound)
                checked += 1
    return violations == 0, f"subsequences={checked} violations={violations} max D*/bound={worst:.4f}"


def test_criterion_3_halton_subsequence_bound(announce):
    (ok, detail), t = timed(criterion_3)
    assert announce(3, "randomized Halton subsequences within (d+1)!(ln N)^d bound", ok, t, 300, detail)


# 4

HYBRID_SPEC = """\
generator = hybrid-practical
d = 2, 3, 4
N = 64, 256, 1024, 4096
seeds = 0..99
measurements = auto(1/128)
bounds = hybrid_matrix
epsilon = 0.01
"""


def criterion_4():
    report = run_experiment(parse_spec(HYBRID_SPEC), write=False)
    agg = report.aggregate
    ok = agg["rows"] == 1200 and agg["passed"] == 1200 and agg["max_normalized"] <= 30
    methods = {r["method"] for r in report.rows}
    return ok, (f"passed={agg['passed']}/{agg['rows']} max sqrt(N/d)*D*={agg['max_normalized']:.4f} "
                f"methods={sorted(methods)}")


def test_criterion_4_hybrid_matrix_bound_proxy(announce):
    (ok, detail), t = timed(criterion_4)
    assert announce(4, "hybrid matrix D* <= bound at eps=0.01, 100 seeds", ok, t, 1800, detail)


# 5

def criterion_5():
    rng = np.random.default_rng(5)
    N, failures = 64, 0
    for _ in range(200):
        P = PointSet.from_rows(random_rationals(rng, N, 2))
        M = int(rng.integers(1, N))
        D_N = star_discrepancy_exact(P).value
        D_M = star_discrepancy_exact(P.head(M)).value
        D_MN = range_discrepancy(P, M, N).value
        failures += D_N > compose_bound(M, N, D_M, D_MN)
    return failures == 0, f"failures={failures}"


def test_criterion_5_splitting_inequality(announce):
    (ok, detail), t = timed(criterion_5)
    assert announce(5, "splitting inequality, 200 random (P, M), d=2, N=64", ok, t, 30, detail)


# 6

def criterion_6():
    problems = []
    for d in (1, 2, 3):
        for h in range(1, 6):
            snapped = dyadic_snap_cover(build_cover(d, F(1, 2 ** (h + 2)), dyadic=True), h)
            report = validate_cover(snapped, F(1, 2**h), samples=100_000, seed=h)
            if report.max_weight > F(1, 2**h) or not report.ok:
                problems.append((d, h, report.failures))
    return not problems, f"cases=15 problems={problems}"


def test_criterion_6_snapped_covers_validate(announce):
    (ok, detail), t = timed(criterion_6)
    assert announce(6, "snapped covers valid, d in 1..3, h in 1..5", ok, t, 120, detail)


# 7

def criterion_7():
    misses, widest = 0, F(0)
    for seed in range(20):
        P = randomized_halton([3, 5], 256, seed)
        exact = star_discrepancy_exact(P).value
        for delta in (F(1, 16), F(1, 32)):
            iv = cover_discrepancy_interval(P, delta)
            misses += not (iv.lo <= exact <= iv.lo + delta)
            widest = max(widest, exact - iv.lo)
    return misses == 0, f"misses={misses} max(D*-lo)={float(widest):.5f}"


def test_criterion_7_cover_interval_contains_exact(announce):
    (ok, detail), t = timed(criterion_7)
    assert announce(7, "cover interval contains exact D*, d=2, N=256, 20 seeds", ok, t, 120, detail)


# 8

def criterion_8():
    reports = bernstein_monte_carlo(N=100, trials=100_000, ts=(4, 6, 8, 10), seed=0)
    pairs = " ".join(f"t={r.inputs['t']}:{r.observed:.4f}<={r.bound_value:.4f}" for r in reports)
    return all(r.passed for r in reports), pairs


def test_criterion_8_bernstein_monte_carlo(announce):
    (ok, detail), t = timed(criterion_8)
    assert announce(8, "maximal Bernstein tail vs Monte Carlo (3 sigma)", ok, t, 60, detail)


# 9

def criterion_9():
    reports = verify_battery(series_max=10_000, prime_max=10_000, eps_grid=1000, d_range=range(2, 41))
    failed = [r.name for r in reports if not r.passed]
    return not failed, f"checks={len(reports)} failed={failed}"


def test_criterion_9_constants_battery(announce):
    (ok, detail), t = timed(criterion_9)
    assert announce(9, "constants battery", ok, t, 10, detail)


# 10

def criterion_10():
    d, H, N = 4, 64, 1000
    P = hybrid_matrix(d, N, 0, H=H)
    b = P.provenance["budget"]
    ternary, bits = b.per_column[0], sum(b.per_column[1:])
    limit = d * H + (math.ceil(math.log2(d)) + 1) * d * N
    ok = P.column_bases()[0] == 3 and ternary == 64 and bits == 8184 and b.total <= limit
    return ok, f"base-3 digits={ternary} bits={bits} total={b.total} <= {limit}"


def test_criterion_10_digit_budget(announce):
    (ok, detail), t = timed(criterion_10)
    assert announce(10, "digit budget d=4, H=64, N=1000", ok, t, 5, detail)


# 11

def criterion_11():
    checked, violations = 0, []
    for gen in ("halton", "rhalton", "hybrid-practical", "hybrid-faithful"):
        seeds = (0,) if gen == "halton" else (0, 1, 2)
        for d in (1, 2, 3):
            for N in (16, 64, 256):
                for seed in seeds:
                    P = make_points(gen, d, N, seed)
                    dstar = star_discrepancy_exact(P).value
                    for f in builtin_suite(d):
                        checked += 1
                        if not kh_certificate(f, P, dstar).passed:
                            violations.append((gen, d, N, seed, f.name))
    return not violations, f"certificates={checked} violations={violations[:5]}"


def test_criterion_11_koksma_hlawka(announce):
    (ok, detail), t = timed(criterion_11)
    assert announce(11, "Koksma-Hlawka over function x generator x N suite", ok, t, 60, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
