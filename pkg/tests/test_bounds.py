import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybrid_qmc.bounds import (
    SERIES_LIMIT,
    BoundReport,
    bernstein_monte_carlo,
    bernstein_tail,
    cmde,
    halton_classical_bound,
    halton_subseq_bound,
    hybrid_matrix_bound,
    log_factor_threshold,
    log_factorial,
    log_space_checks,
    prime_growth_check,
    proof_constants,
    proof_depth,
    series_partial_sum,
    subsequence_sqrt_bound,
    verify_battery,
)

from oracles import is_prime


def test_hybrid_matrix_bound_examples():
    assert hybrid_matrix_bound(4, 1024, 1) == 161.0
    assert hybrid_matrix_bound(1, 1, 1) == 2576.0
    assert hybrid_matrix_bound(2, 512, 1 / math.e) == pytest.approx(183.3125, rel=1e-14)
    with pytest.raises(ValueError):
        hybrid_matrix_bound(2, 10, 0)
    with pytest.raises(ValueError):
        hybrid_matrix_bound(2, 10, 1.5)


@given(st.integers(1, 50), st.integers(1, 10**9), st.floats(1e-12, 1))
def test_hybrid_matrix_bound_quarter_scaling(d, N, eps):
    assert hybrid_matrix_bound(d, 4 * N, eps) == pytest.approx(hybrid_matrix_bound(d, N, eps) / 2, rel=1e-12)


def test_sqrt_bound_examples():
    assert subsequence_sqrt_bound(4, 1024) == 1 / 16
    assert subsequence_sqrt_bound(2, 2) == 1
    assert all(subsequence_sqrt_bound(d, d) == 1 for d in range(2, 30))


def test_halton_subseq_bound_examples():
    expected = 2 / 4096 + 6 * math.log(4096) ** 2 / 1024
    assert halton_subseq_bound(2, 4096, 1024) == pytest.approx(expected, rel=1e-14)
    assert halton_subseq_bound(2, 4096, 1024) == pytest.approx(0.4059, abs=1e-4)
    assert halton_subseq_bound(1, 3, 3) == pytest.approx(1 / 3 + 2 * math.log(3) / 3, rel=1e-14)
    values = [halton_subseq_bound(3, 1000, n) for n in range(1, 1001, 37)]
    assert values == sorted(values, reverse=True)


def test_halton_subseq_bound_large_d_uses_log_space():
    direct = 21 / 4096 + math.factorial(22) * math.log(4096) ** 21 / 100
    assert halton_subseq_bound(21, 4096, 100) == pytest.approx(direct, rel=1e-10)


def test_log_factorial_switch_is_continuous():
    for n in (0, 1, 5, 20, 21, 30):
        assert log_factorial(n) == pytest.approx(math.log(math.factorial(n)), rel=1e-13)


def test_halton_classical_bound():
    C = 2.5
    assert halton_classical_bound(1, math.e, C) == pytest.approx(C / math.e)
    assert halton_classical_bound(2, math.e**2, C) == pytest.approx(4 * C / math.e**2)
    values = [halton_classical_bound(3, N, C) for N in np.geomspace(30, 1e9, 50)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_bernstein_tail_examples():
    assert bernstein_tail(100, 0.25, 10) == pytest.approx(2 * math.exp(-100 / (50 + 20 / 3)), rel=1e-14)
    assert bernstein_tail(100, 0.25, 10) == pytest.approx(0.3425, abs=1e-4)
    assert bernstein_tail(100, 0.25, 1e-9) == 1.0


def test_bernstein_monte_carlo_small():
    reports = bernstein_monte_carlo(trials=20_000, seed=3)
    assert [r.inputs["t"] for r in reports] == [4, 6, 8, 10]
    assert all(r.passed for r in reports)
    assert all(0 <= r.observed <= 1 for r in reports)


def test_cmde_examples():
    assert cmde(1, 2, 1) == 1819
    assert cmde(48, 2, 1) == 1821
    assert cmde(47, 2, 1) == 1819
    assert cmde(1, 2, 1 / math.e) == pytest.approx(2071)


def test_proof_constants_eps_one():
    c = proof_constants(1)
    assert (c.C1, c.C2) == (15.907, 14.575)
    s = 8 + 2 * math.sqrt(2)
    assert c.C3 == pytest.approx(2 * 15.907**2 / (s + 2 * 15.907) - 1)
    assert c.min_ok


@pytest.mark.parametrize("k", range(13))
def test_proof_constants_decade_grid(k):
    assert proof_constants(10.0**-k).min_ok


@given(st.floats(0.1, 1e4), st.floats(0.1, 1e4))
def test_c3_increasing_in_c1(a, b):
    s = 8 + 2 * math.sqrt(2)
    c3 = lambda c1: 2 * c1 * c1 / (s + 2 * c1) - 1
    if a < b:
        assert c3(a) <= c3(b)


def test_proof_depth_examples():
    assert proof_depth(1, 2) == -1
    assert proof_depth(10, 4) == 3
    assert proof_depth(7, 3) == math.ceil(4 - math.log2(3) / 2 - 2)


def test_series_examples():
    assert series_partial_sum(1) == pytest.approx(math.sqrt(2**1.5 * 3**1.5 / 2), rel=1e-14)
    assert series_partial_sum(1) == pytest.approx(2.711, abs=1e-3)
    assert series_partial_sum(10) == pytest.approx(24.19, abs=1e-2)
    assert series_partial_sum(200) <= SERIES_LIMIT


def test_series_monotone_and_bounded():
    sums = np.cumsum([math.sqrt(h * 2 ** (1.5 * (1 + math.log2(h + 2)) - h)) for h in range(1, 10_001)])
    assert np.all(np.diff(sums) >= 0)
    assert sums[-1] <= SERIES_LIMIT
    assert series_partial_sum(10_000) == pytest.approx(sums[-1], rel=1e-12)


def test_prime_growth_example_and_sweep():
    p5 = [p for p in range(3, 100) if is_prime(p)][4]
    assert p5 == 13
    assert 5 <= p5 <= 1 + 1.75 * 5 * math.log(5)
    report = prime_growth_check(10_000)
    assert report.passed
    assert report.detail["growth_failures"] == []
    with pytest.raises(ValueError):
        prime_growth_check(4)


def test_log_factor_threshold_is_exact_crossing():
    for i, p in [(2, 5), (3, 7), (10, 31)]:
        t = log_factor_threshold(i, p)
        f = lambda L: (i + 1) / i * ((p - 1) / (2 * math.log(p)) * L + (p + 1) / 2) - (i + 1) * L
        assert f(t) == pytest.approx(0, abs=1e-9)
        assert f(t + 1) < 0 < f(t - 1)


def test_log_space_examples():
    reports = {(r.name, r.inputs["d"]): r for r in log_space_checks(range(2, 41))}
    assert reports[("log_factorial_vs_power", 2)].passed
    assert reports[("log_chain_exponent", 10)].passed
    # d = 3: 2^(6*2^3) = 2^48 = sqrt(2^96)
    assert reports[("log_chain_exponent", 3)].bound_value == 48
    assert reports[("subsequence_terms_at_regime", 3)].inputs["log2_N"] == 96
    assert all(r.passed for r in reports.values())
    with pytest.raises(ValueError):
        log_space_checks([41])


def test_verify_battery_passes():
    reports = verify_battery()
    assert all(r.passed for r in reports)
    assert {r.name for r in reports} >= {"series_partial_sum", "prime_growth", "proof_constants_min"}


def test_report_pass_rule_and_json():
    r = BoundReport("x", {"d": 2}, 1.5, 2.0)
    assert r.passed is False
    assert r.to_dict()["pass"] is False
    assert BoundReport("x", {}, 1.0).passed is None
