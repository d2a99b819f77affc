"""Closed-form discrepancy bounds, proof constants and their numerical checks.

``log`` is the natural logarithm throughout; ``log2`` is written out where
base 2 is meant.  Bounds above 1 are returned unclamped and flagged
``vacuous`` in reports, since a star discrepancy never exceeds 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .pointgen import odd_primes

__all__ = [
    "BoundReport",
    "hybrid_matrix_bound",
    "subsequence_sqrt_bound",
    "halton_subseq_bound",
    "halton_classical_bound",
    "bernstein_tail",
    "bernstein_monte_carlo",
    "cmde",
    "ProofConstants",
    "proof_constants",
    "proof_depth",
    "series_term",
    "series_partial_sum",
    "SERIES_LIMIT",
    "prime_growth_check",
    "log_factor_threshold",
    "log_space_checks",
    "log_factorial",
    "verify_battery",
]

SERIES_LIMIT = 27.917
# smallest N where the square-root subsequence bound applies: 2**(12 * 2**d) with d = 2
SQRT_REGIME_LOG = 48 * math.log(2)


@dataclass
class BoundReport:
    """A bound evaluated at ``inputs``, optionally against an observed value.

    ``passed`` is ``observed <= bound_value`` whenever ``observed`` is set,
    unless a check supplies its own verdict.
    """

    name: str
    inputs: dict
    bound_value: float
    observed: float | None = None
    passed: bool | None = None
    vacuous: bool = False
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed is None and self.observed is not None:
            self.passed = bool(self.observed <= self.bound_value)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": {k: _jsonable(v) for k, v in self.inputs.items()},
            "bound_value": _jsonable(self.bound_value),
            "observed": _jsonable(self.observed),
            "pass": self.passed,
            "vacuous": self.vacuous,
            **({"detail": {k: _jsonable(v) for k, v in self.detail.items()}} if self.detail else {}),
        }


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _check_eps(eps) -> float:
    eps = float(eps)
    if not 0 < eps <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {eps}")
    return eps


def hybrid_matrix_bound(d: int, N: int, eps) -> float:
    """(2576 + 357 log(1/ε)) · sqrt(d/N): holds for the hybrid matrix with
    probability at least 1 - ε, simultaneously for all N and d."""
    if d < 1 or N < 1:
        raise ValueError("d and N must be >= 1")
    eps = _check_eps(eps)
    return (2576 + 357 * math.log(1 / eps)) * math.sqrt(d / N)


def subsequence_sqrt_bound(d: int, n_sub: int) -> float:
    """sqrt(d / |N_{κ,γ}|), the subsequence bound for very large N."""
    if d < 2 or n_sub < 1:
        raise ValueError("need d >= 2 and n_sub >= 1")
    return math.sqrt(d / n_sub)


def log_factorial(n: int) -> float:
    """log(n!) from exact integers up to 20, log-gamma above."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n <= 20:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1)


def halton_subseq_bound(d: int, N: int, n_sub: int) -> float:
    """d/N + (d+1)! (log N)^d / n_sub for a Halton subsequence of size n_sub."""
    if d < 1 or N < 2 or not 1 <= n_sub <= N:
        raise ValueError(f"need d >= 1, N >= 2, 1 <= n_sub <= N (got {d}, {N}, {n_sub})")
    if d <= 20:
        second = math.factorial(d + 1) * math.log(N) ** d / n_sub
    else:
        second = math.exp(log_factorial(d + 1) + d * math.log(math.log(N)) - math.log(n_sub))
    return d / N + second


def halton_classical_bound(d: int, N, C_d: float) -> float:
    """C_d (log N)^d / N.  The constant is the caller's."""
    if C_d <= 0:
        raise ValueError("C_d must be positive")
    if d < 1 or N < 1:
        raise ValueError("d and N must be >= 1")
    return C_d * math.log(N) ** d / N


def bernstein_tail(N: int, sigma2: float, t: float) -> float:
    """min(1, 2 exp(-t^2 / (2 N σ^2 + 2t/3))): tail of the maximal partial
    sum of N i.i.d. centred variables bounded by 1 with variance σ^2."""
    if N < 1 or sigma2 <= 0 or t <= 0:
        raise ValueError("need N >= 1, sigma2 > 0, t > 0")
    return min(1.0, 2 * math.exp(-t * t / (2 * N * sigma2 + 2 * t / 3)))


def bernstein_monte_carlo(N: int = 100, trials: int = 100_000, ts: Sequence[float] = (4, 6, 8, 10),
                          seed: int = 0, chunk: int = 20_000) -> list[BoundReport]:
    """Empirical P(max_M |S_M| > t) for sums of ±1/2 steps (σ^2 = 1/4).

    A report passes when the frequency stays below the bound plus three
    binomial standard errors of the bound's own frequency.
    """
    rng = np.random.default_rng(seed)
    exceed = np.zeros(len(ts), dtype=np.int64)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        steps = rng.integers(0, 2, size=(m, N), dtype=np.int8) - 0.5
        peak = np.abs(np.cumsum(steps, axis=1)).max(axis=1)
        for k, t in enumerate(ts):
            exceed[k] += int((peak > t).sum())
        done += m
    out = []
    for k, t in enumerate(ts):
        b = bernstein_tail(N, 0.25, t)
        freq = exceed[k] / trials
        margin = 3 * math.sqrt(b * (1 - b) / trials)
        out.append(BoundReport(
            "bernstein_max_partial_sum",
            {"N": N, "sigma2": 0.25, "t": t, "trials": trials, "seed": seed},
            b, freq, passed=bool(freq <= b + margin), detail={"margin": margin},
        ))
    return out


def cmde(m: int, d: int, eps) -> float:
    """1819 + 252 log(1/ε) when 12·2^d > m, else 1821 + 252 log(1/ε)."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    eps = _check_eps(eps)
    base = 1819 if 12 * 2**d > m else 1821
    return base + 252 * math.log(1 / eps)


@dataclass(frozen=True)
class ProofConstants:
    eps: float
    C1: float
    C2: float
    C3: float
    C4: float
    required: float

    @property
    def min_ok(self) -> bool:
        return min(self.C3, self.C4) >= self.required


def proof_constants(eps) -> ProofConstants:
    eps = _check_eps(eps)
    L = math.log(1 / eps)
    C1 = 15.907 + 2.146 * L
    C2 = 14.575 + 5.748 * L
    s = 8 + 2 * math.sqrt(2)
    C3 = 2 * C1 * C1 / (s + 2 * C1) - 1
    C4 = C2 * C2 / (s + 2 / 3 * C2)
    return ProofConstants(eps, C1, C2, C3, C4, 7.947 + L / 2)


def proof_depth(m: int, d: int) -> int:
    """⌈(m+1)/2 - log2(d)/2 - 2⌉, exact when d is a power of two."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    if d & (d - 1) == 0:
        return math.ceil(Fraction(m + 1, 2) - Fraction(d.bit_length() - 1, 2) - 2)
    return math.ceil((m + 1) / 2 - math.log2(d) / 2 - 2)


def series_term(h: int) -> float:
    """sqrt(h · 2^(1.5(1 + log2(h+2)) - h))."""
    return math.sqrt(h * 2 ** (1.5 * (1 + math.log2(h + 2)) - h))


def series_partial_sum(Hmax: int) -> float:
    if Hmax < 1:
        raise ValueError("Hmax must be >= 1")
    return math.fsum(series_term(h) for h in range(1, Hmax + 1))


def log_factor_threshold(i: int, p: int) -> float:
    """Smallest log N from which
    (i+1)/i · ((p-1)/(2 log p) · log N + (p+1)/2) <= (i+1) log N holds.

    Both sides are affine in log N, so the inequality holds exactly for
    log N at or above the returned value (inf if never).
    """
    a = (p - 1) / (2 * math.log(p))
    b = (p + 1) / 2
    return b / (i - a) if i > a else math.inf


def prime_growth_check(i_max: int, regime_log: float = SQRT_REGIME_LOG) -> BoundReport:
    """Check i <= p_i <= 1 + 7/4 · i log i for the i-th odd prime, 5 <= i <= i_max,
    and that the per-coordinate log factor is dominated by (i+1) log N for
    every i <= i_max once log N >= ``regime_log``.
    """
    if i_max < 5:
        raise ValueError("i_max must be >= 5")
    if i_max > 10**7:
        raise ValueError("i_max above the sieve capacity of 10**7")
    primes = odd_primes(i_max)
    growth_fail = [
        (i, p) for i, p in enumerate(primes, start=1)
        if i >= 5 and not (i <= p <= 1 + 1.75 * i * math.log(i))
    ]
    thresholds = [log_factor_threshold(i, p) for i, p in enumerate(primes, start=1)]
    worst = max(range(len(thresholds)), key=thresholds.__getitem__)
    small = {i: thresholds[i - 1] for i in range(1, min(i_max, 5) + 1)}
    ok = not growth_fail and thresholds[worst] <= regime_log
    return BoundReport(
        "prime_growth",
        {"i_max": i_max, "log_N_from": regime_log},
        regime_log,
        thresholds[worst],
        passed=ok,
        detail={
            "growth_failures": growth_fail[:10],
            "worst_index": worst + 1,
            "log_N_thresholds_small_i": small,
        },
    )


def log_space_checks(d_range: Iterable[int] = range(2, 41)) -> list[BoundReport]:
    """Three checks per d, all in log space.

    * factorial:  8 (d+1)! / (12^(d-1/2) (log 2)^d sqrt d) <= 2^(d^2 - d/2)
    * chain:      2d^2 + 2 log2(12) d <= 6 · 2^d, so (12·2^d)^(2d) <= sqrt(N)
                  at N = 2^(12·2^d)
    * subsequence: sqrt(d/n) + (d+1)! (log N)^d / sqrt(d n) <= 1 at that N with
                  the smallest admissible subsequence n = N / (16 log2 N)
    """
    out = []
    ln2 = math.log(2)
    for d in d_range:
        if not 2 <= d <= 40:
            raise ValueError("d must lie in 2..40")
        lhs = math.log(8) + log_factorial(d + 1) - (d - 0.5) * math.log(12) - d * math.log(ln2) - 0.5 * math.log(d)
        rhs = (d * d - d / 2) * ln2
        out.append(BoundReport("log_factorial_vs_power", {"d": d}, rhs, lhs))

        mid = 2 * d * d + 2 * math.log2(12) * d
        out.append(BoundReport("log_chain_exponent", {"d": d}, 6.0 * 2**d, mid))

        log2_N = 12 * 2**d  # N = 2**log2_N, exactly
        logN = log2_N * ln2
        log_n = logN - math.log(16 * log2_N)
        t1 = 0.5 * (math.log(d) - log_n)
        t2 = log_factorial(d + 1) + d * math.log(logN) - 0.5 * (math.log(d) + log_n)
        lhs160 = math.exp(t1) + math.exp(t2)
        out.append(BoundReport("subsequence_terms_at_regime", {"d": d, "log2_N": log2_N}, 1.0, lhs160))
    return out


def verify_battery(series_max: int = 10_000, prime_max: int = 10_000,
                   eps_grid: int = 1000, d_range: Iterable[int] = range(2, 41)) -> list[BoundReport]:
    """All deterministic constant checks, in a fixed order."""
    reports: list[BoundReport] = []

    # terms are positive, so partial sums are nondecreasing and the last is the max
    total = series_partial_sum(series_max)
    reports.append(BoundReport("series_partial_sum", {"Hmax": series_max}, SERIES_LIMIT, total))

    reports.append(prime_growth_check(prime_max))
    reports.extend(log_space_checks(d_range))

    worst = None
    for eps in np.logspace(-12, 0, eps_grid):
        c = proof_constants(min(1.0, float(eps)))
        slack = min(c.C3, c.C4) - c.required
        if worst is None or slack < worst[0]:
            worst = (slack, c)
    slack, c = worst
    # min(C3, C4) must reach the requirement: the requirement plays "observed"
    reports.append(BoundReport(
        "proof_constants_min",
        {"eps_grid": eps_grid, "eps_range": [1e-12, 1.0]},
        min(c.C3, c.C4),
        c.required,
        detail={"worst_eps": c.eps, "C1": c.C1, "C2": c.C2, "C3": c.C3, "C4": c.C4},
    ))
    return reports
