"""Quasi-Monte Carlo averages with Koksma–Hlawka error certificates.

Every built-in test function is a product of one-dimensional factors (or a
constant), so its integral and its Hardy–Krause variation (anchored at 1)
are known in closed form:

    V_HK(prod g_i) = prod(V(g_i) + |g_i(1)|) - prod |g_i(1)|.

Functions carry an exact evaluator on rationals, so certificates on exact
point sets involve no rounding at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bounds import BoundReport
from .discrepancy import as_point_set

__all__ = [
    "Factor",
    "TestFunction",
    "product_function",
    "constant",
    "projection",
    "anchored_box_indicator",
    "builtin_suite",
    "get_function",
    "FUNCTION_NAMES",
    "qmc_integrate",
    "kh_certificate",
]


@dataclass(frozen=True)
class Factor:
    """A one-dimensional factor g on [0, 1] with its integral, total
    variation and value at 1."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    exact: Callable[[Fraction], Fraction]
    integral: Fraction
    variation: Fraction
    at_one: Fraction


IDENTITY = Factor("x", lambda x: x, lambda x: x, Fraction(1, 2), Fraction(1), Fraction(1))
SQUARE = Factor("x^2", lambda x: x * x, lambda x: x * x, Fraction(1, 3), Fraction(1), Fraction(1))
TENT = Factor(
    "|2x-1|", lambda x: np.abs(2 * x - 1), lambda x: abs(2 * x - 1),
    Fraction(1, 2), Fraction(2), Fraction(1),
)


def _step(b: Fraction) -> Factor:
    return Factor(
        f"1[x<{b}]", lambda x, b=float(b): (x < b).astype(float), lambda x, b=b: Fraction(int(x < b)),
        b, Fraction(1) if b < 1 else Fraction(0), Fraction(0) if b < 1 else Fraction(1),
    )


@dataclass(frozen=True)
class TestFunction:
    """f on [0,1)^d with a vectorised float evaluator, an optional exact
    evaluator on rational points, its integral and V_HK."""

    __test__ = False  # not a pytest class

    name: str
    d: int
    f: Callable[[np.ndarray], np.ndarray]
    exact_integral: Fraction | float
    vhk: Fraction | float | None
    exact_f: Callable[[Sequence[Fraction]], Fraction] | None = None

    def __post_init__(self):
        if self.vhk is not None and self.vhk < 0:
            raise ValueError("variation must be >= 0")


def product_function(name: str, factors: Sequence[Factor]) -> TestFunction:
    factors = tuple(factors)

    def f(x):
        out = np.ones(x.shape[0])
        for i, g in enumerate(factors):
            out = out * g.f(x[:, i])
        return out

    def exact(p):
        return math.prod((g.exact(c) for g, c in zip(factors, p)), start=Fraction(1))

    integral = math.prod((g.integral for g in factors), start=Fraction(1))
    vhk = (math.prod((g.variation + abs(g.at_one) for g in factors), start=Fraction(1))
           - math.prod((abs(g.at_one) for g in factors), start=Fraction(1)))
    return TestFunction(name, len(factors), f, integral, vhk, exact)


def constant(d: int, c=1) -> TestFunction:
    c = Fraction(c)
    return TestFunction(f"const({c})", d, lambda x: np.full(x.shape[0], float(c)), c, Fraction(0),
                        lambda p: c)


def projection(d: int, i: int = 0) -> TestFunction:
    """x_i (0-based axis), V_HK = 1."""
    if not 0 <= i < d:
        raise ValueError(f"axis {i} outside 0..{d - 1}")
    return TestFunction(f"proj{i + 1}", d, lambda x: x[:, i].copy(), Fraction(1, 2), Fraction(1),
                        lambda p: Fraction(p[i]))


def anchored_box_indicator(beta: Sequence) -> TestFunction:
    """1 on [0, beta), V_HK = 1 whenever every beta_i < 1."""
    beta = [Fraction(b) for b in beta]
    return product_function("box(" + ",".join(str(b) for b in beta) + ")", [_step(b) for b in beta])


def _default_box(d: int) -> list[Fraction]:
    return [Fraction(7, 10) if i % 2 == 0 else Fraction(2, 5) for i in range(d)]


FUNCTION_NAMES = ("const", "proj", "prod", "prod_sq", "tent", "box")


def get_function(name: str, d: int) -> TestFunction:
    """Built-in by name; ``box:b1,b2,...`` fixes the box corner."""
    if d < 1:
        raise ValueError("d must be >= 1")
    key, _, arg = name.partition(":")
    if key == "const":
        return constant(d, Fraction(arg) if arg else 1)
    if key == "proj":
        return projection(d, int(arg) - 1 if arg else 0)
    if key == "prod":
        return product_function("prod", [IDENTITY] * d)
    if key == "prod_sq":
        return product_function("prod_sq", [SQUARE] * d)
    if key == "tent":
        return product_function("tent", [TENT] * d)
    if key == "box":
        beta = [Fraction(b) for b in arg.split(",")] if arg else _default_box(d)
        if len(beta) != d:
            raise ValueError(f"box corner has {len(beta)} coordinates, expected {d}")
        return anchored_box_indicator(beta)
    raise ValueError(f"unknown function {name!r}; choose from {', '.join(FUNCTION_NAMES)}")


def builtin_suite(d: int) -> list[TestFunction]:
    return [get_function(n, d) for n in FUNCTION_NAMES]


def qmc_integrate(f: TestFunction, P, exact: bool = False):
    """(1/N) Σ f(x_n).  With ``exact=True`` the mean is a Fraction computed
    from the exact evaluator; otherwise an exactly rounded float sum."""
    P = as_point_set(P)
    if P.N < 1:
        raise ValueError("empty point set")
    if f.d != P.d:
        raise ValueError(f"function has dimension {f.d}, points have {P.d}")
    if exact:
        if f.exact_f is None:
            raise ValueError(f"{f.name} has no exact evaluator")
        return sum((f.exact_f(p) for p in P.fractions), Fraction(0)) / P.N
    return math.fsum(f.f(P.as_array()).tolist()) / P.N


def kh_certificate(f: TestFunction, P, dstar) -> BoundReport:
    """|mean - integral| against dstar · V_HK.

    Exact arithmetic is used when ``f`` has an exact evaluator and both
    ``dstar`` and the integral are rational.
    """
    if f.vhk is None:
        raise ValueError(f"{f.name} has no Hardy-Krause variation")
    if not 0 <= dstar <= 1:
        raise ValueError(f"dstar must lie in [0, 1], got {dstar}")
    P = as_point_set(P)
    rational = (f.exact_f is not None and isinstance(dstar, (int, Fraction))
                and isinstance(f.exact_integral, (int, Fraction)))
    mean = qmc_integrate(f, P, exact=rational)
    error = abs(mean - f.exact_integral)
    bound = dstar * f.vhk
    return BoundReport(
        "koksma_hlawka",
        {"function": f.name, "N": P.N, "d": P.d, "dstar": dstar, "vhk": f.vhk},
        bound,
        error,
        passed=bool(error <= bound),
        detail={"estimate": mean, "integral": f.exact_integral, "exact": rational},
    )
