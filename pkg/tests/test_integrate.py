from fractions import Fraction
from statistics import median

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as quad

from hybrid_qmc.discrepancy import star_discrepancy_1d, star_discrepancy_exact
from hybrid_qmc.integrate import (
    FUNCTION_NAMES,
    anchored_box_indicator,
    builtin_suite,
    constant,
    get_function,
    kh_certificate,
    projection,
    qmc_integrate,
)
from hybrid_qmc.pointgen import PointSet, halton_stream, hybrid_matrix

from oracles import vhk_2d_finite_difference

F = Fraction


def scalar(f, d):
    return lambda *x: float(f.f(np.array([x[:d]]))[0])


def breakpoints(name):
    return {"tent": [0.5], "box": [0.4, 0.7]}.get(name, [])


@pytest.mark.parametrize("name", FUNCTION_NAMES)
@pytest.mark.parametrize("d", [1, 2])
def test_integral_matches_quadrature(name, d):
    f = get_function(name, d)
    opts = {"points": breakpoints(name), "limit": 200}
    value, _ = quad.nquad(scalar(f, d), [(0, 1)] * d, opts=[opts] * d)
    assert value == pytest.approx(float(f.exact_integral), abs=1e-6)


@pytest.mark.parametrize("name,expected", [("const", 0), ("proj", 1), ("prod", 3), ("prod_sq", 3),
                                           ("tent", 8), ("box", 1)])
def test_vhk_matches_finite_difference_2d(name, expected):
    f = get_function(name, 2)
    assert f.vhk == expected
    assert vhk_2d_finite_difference(f.f) == pytest.approx(expected, rel=1e-9)


def test_box_variation_depends_on_corner():
    # a corner coordinate of 1 removes that axis' jump inside [0, 1)
    f = anchored_box_indicator([F(1, 2), F(1)])
    assert f.vhk == 1
    assert vhk_2d_finite_difference(f.f) == pytest.approx(1)


def test_qmc_examples():
    P = halton_stream([3, 5], 20)
    assert qmc_integrate(constant(2), P) == 1.0
    assert qmc_integrate(projection(1), [(F(1, 2),)], exact=True) == F(1, 2)
    assert qmc_integrate(projection(1), [(F(1, 2),)]) == 0.5


def test_qmc_dimension_mismatch():
    with pytest.raises(ValueError):
        qmc_integrate(projection(3), halton_stream([3, 5], 4))


def test_prod_on_halton_243_within_kh():
    P = halton_stream([3, 5], 243)
    f = get_function("prod", 2)
    report = kh_certificate(f, P, star_discrepancy_exact(P).value)
    assert report.passed
    assert report.detail["integral"] == F(1, 4)


@pytest.mark.parametrize("N", [3, 9, 27])
def test_kh_projection_van_der_corput(N):
    P = halton_stream([3], N)
    dstar = star_discrepancy_1d(P).value
    report = kh_certificate(projection(1), P, dstar)
    assert report.bound_value == dstar
    assert report.passed


def test_kh_prod_halton_81():
    P = halton_stream([3, 5], 81)
    report = kh_certificate(get_function("prod", 2), P, star_discrepancy_exact(P).value)
    assert report.inputs["vhk"] == 3
    assert report.passed


def test_kh_constant_observes_zero():
    report = kh_certificate(constant(3, F(5, 7)), hybrid_matrix(3, 10, 0), F(1, 100))
    assert report.observed == 0
    assert report.passed


def test_kh_certificate_errors():
    P = halton_stream([3], 4)
    f = get_function("proj", 1)
    with pytest.raises(ValueError):
        kh_certificate(f, P, F(3, 2))
    with pytest.raises(ValueError):
        get_function("box:1/2", 2)
    with pytest.raises(ValueError):
        get_function("sine", 2)


@settings(max_examples=25)
@given(st.integers(1, 3), st.integers(2, 60), st.integers(0, 10_000))
def test_kh_never_violated_on_hybrid_points(d, N, seed):
    P = hybrid_matrix(d, N, seed, H=24)
    dstar = star_discrepancy_exact(P).value
    for f in builtin_suite(d):
        report = kh_certificate(f, P, dstar)
        assert report.passed, report.to_dict()


@given(st.integers(1, 3), st.integers(1, 30), st.randoms(use_true_random=False))
def test_qmc_permutation_invariant(d, N, rnd):
    P = hybrid_matrix(d, N, 1, H=24)
    rows = list(P.points)
    rnd.shuffle(rows)
    Q = PointSet.from_rows(rows, d=d)
    for f in builtin_suite(d):
        assert qmc_integrate(f, Q, exact=True) == qmc_integrate(f, P, exact=True)
        assert qmc_integrate(f, Q) == qmc_integrate(f, P)


def test_error_shrinks_with_N_in_median():
    f = get_function("prod", 2)
    errors = {}
    for N in (64, 1024):
        errors[N] = median(abs(qmc_integrate(f, hybrid_matrix(2, N, s)) - 0.25) for s in range(20))
    assert errors[1024] < errors[64]
