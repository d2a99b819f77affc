"""Star discrepancy of finite point sets, computed exactly.

Coordinates are rationals, so every count and volume is exact.  The d-dim
routine scans the grid of coordinate values with float arithmetic to find the
few corners that can attain the maximum, then re-evaluates those corners with
:class:`fractions.Fraction` and returns an exact value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .pointgen import PointSet

__all__ = [
    "AnchoredBox",
    "DiscrepancyResult",
    "BudgetExceeded",
    "DEFAULT_BUDGET",
    "as_point_set",
    "local_discrepancy",
    "star_discrepancy_1d",
    "star_discrepancy_exact",
    "grid_work",
    "range_discrepancy",
    "subsequence",
    "subsequence_indices",
    "compose_bound",
    "reverse_compose_bound",
]

DEFAULT_BUDGET = 2**25
# float screening slack; float corner values are within ~1e-15 of exact ones
_SCREEN_TOL = 1e-9

SIDES = ("closed", "open")


class BudgetExceeded(ValueError):
    """Grid enumeration would exceed the configured work budget."""


@dataclass(frozen=True)
class AnchoredBox:
    """The box [0, beta) with upper corner ``beta`` in (0, 1]^d."""

    beta: tuple

    def __post_init__(self):
        beta = tuple(Fraction(b) for b in self.beta)
        if not beta:
            raise ValueError("empty corner")
        for b in beta:
            if not 0 < b <= 1:
                raise ValueError(f"corner coordinate {b} outside (0, 1]")
        object.__setattr__(self, "beta", beta)

    @property
    def volume(self) -> Fraction:
        return math.prod(self.beta, start=Fraction(1))

    @property
    def d(self) -> int:
        return len(self.beta)


@dataclass(frozen=True)
class DiscrepancyResult:
    """Star discrepancy with the corner that attains it.

    ``side == "closed"`` means the value is the limit of boxes shrinking onto
    ``witness`` from above (points on the boundary counted);
    ``side == "open"`` means the half-open box [0, witness) itself.
    """

    value: Fraction
    witness: tuple
    side: str
    N: int
    d: int

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "value_exact": str(self.value),
            "witness": [str(w) for w in self.witness],
            "side": self.side,
            "N": self.N,
            "d": self.d,
        }


def as_point_set(P) -> PointSet:
    if isinstance(P, PointSet):
        return P
    return PointSet.from_rows(P)


def local_discrepancy(P, beta, closed: bool = False) -> Fraction:
    """``#{n: x_n in [0, beta)} / N - vol([0, beta))``.

    With ``closed=True`` points on the upper faces count too, which is the
    limit of the half-open box as the corner decreases to ``beta``.
    """
    P = as_point_set(P)
    if P.N == 0:
        raise ValueError("local discrepancy of an empty point set")
    b = beta.beta if isinstance(beta, AnchoredBox) else tuple(Fraction(c) for c in beta)
    if len(b) != P.d:
        raise ValueError(f"corner has dimension {len(b)}, points have {P.d}")
    # a closed-limit corner may sit on 0 (the limit of shrinking boxes)
    for c in b:
        if not (0 <= c <= 1) or (c == 0 and not closed):
            raise ValueError(f"corner coordinate {c} outside (0, 1]")
    volume = math.prod(b, start=Fraction(1))
    if closed:
        count = sum(all(x <= c for x, c in zip(p, b)) for p in P.fractions)
    else:
        count = sum(all(x < c for x, c in zip(p, b)) for p in P.fractions)
    return Fraction(count, P.N) - volume


def star_discrepancy_1d(P) -> DiscrepancyResult:
    """Closed form on sorted points: max_i max(i/N - x_(i), x_(i) - (i-1)/N)."""
    P = as_point_set(P)
    if P.d != 1:
        raise ValueError(f"star_discrepancy_1d needs d = 1, got d = {P.d}")
    N = P.N
    if N == 0:
        raise ValueError("star discrepancy of an empty point set")
    xs = sorted(p[0] for p in P.fractions)
    best = None
    for i, x in enumerate(xs, start=1):
        for value, side in ((Fraction(i, N) - x, "closed"), (x - Fraction(i - 1, N), "open")):
            if best is None or value > best[0]:
                best = (value, x, side)
    value, x, side = best
    return DiscrepancyResult(value, (x,), side, N, 1)


def _columns(P: PointSet):
    """Per column: sorted distinct exact values plus 1, float copy, ranks."""
    fr = P.fractions
    out = []
    for i in range(P.d):
        col = [p[i] for p in fr]
        values = sorted(set(col))
        index = {v: k for k, v in enumerate(values)}
        ranks = np.fromiter((index[v] for v in col), dtype=np.int64, count=len(col))
        exact = values + [Fraction(1)]
        floats = np.array([float(v) for v in exact], dtype=float)
        out.append((exact, floats, ranks))
    return out


def grid_work(P) -> int:
    """Number of grid corners star_discrepancy_exact would scan."""
    P = as_point_set(P)
    return math.prod(len({p[i] for p in P.fractions}) + 1 for i in range(P.d))


def star_discrepancy_exact(P, budget: int = DEFAULT_BUDGET) -> DiscrepancyResult:
    """Exact star discrepancy by enumerating the coordinate grid.

    The supremum over half-open anchored boxes is the maximum, over corners
    ``g`` in ``G_1 x ... x G_d`` (``G_i`` = coordinate values in dimension i
    plus 1), of ``C(g)/N - vol(g)`` and ``vol(g) - O(g)/N`` where ``C`` counts
    points ``<= g`` and ``O`` points ``< g`` componentwise.

    Raises :class:`BudgetExceeded` when the grid has more than ``budget``
    corners; :func:`hybrid_qmc.cover.cover_discrepancy_interval` then gives a
    certified interval instead.
    """
    P = as_point_set(P)
    N, d = P.N, P.d
    if N == 0:
        raise ValueError("star discrepancy of an empty point set")
    cols = _columns(P)
    shape = tuple(len(c[0]) for c in cols)
    work = math.prod(shape)
    if work > budget:
        raise BudgetExceeded(
            f"grid has {work} corners (budget {budget}); "
            "use cover_discrepancy_interval for a certified interval"
        )

    # padded cumulative counts: H[a+1] = #{points with rank <= a}
    padded = tuple(s + 1 for s in shape)
    dtype = np.int32 if N < 2**31 else np.int64
    hist = np.zeros(padded, dtype=dtype)
    np.add.at(hist, tuple(c[2] + 1 for c in cols), 1)
    for ax in range(d):
        np.cumsum(hist, axis=ax, out=hist)

    g0 = cols[0][1]
    rest = np.ones(shape[1:], dtype=float)
    for k, c in enumerate(cols[1:]):
        view = [1] * (d - 1)
        view[k] = len(c[1])
        rest = rest * c[1].reshape(view)
    inner = tuple(slice(1, None) for _ in range(d - 1))
    lower = tuple(slice(None, -1) for _ in range(d - 1))

    slab = max(1, (1 << 22) // max(1, rest.size))
    best = -np.inf
    cand_idx, cand_side, cand_val = [], [], []
    for start in range(0, shape[0], slab):
        stop = min(shape[0], start + slab)
        vol = g0[start:stop].reshape((-1,) + (1,) * (d - 1)) * rest
        closed = hist[(slice(start + 1, stop + 1),) + inner] / N - vol
        opened = vol - hist[(slice(start, stop),) + lower] / N
        for side, vals in enumerate((closed, opened)):
            m = float(vals.max())
            if m < best - _SCREEN_TOL:
                continue
            best = max(best, m)
            flat = np.flatnonzero(vals.ravel() >= best - _SCREEN_TOL)
            idx = np.unravel_index(flat, vals.shape)
            idx = (idx[0] + start,) + idx[1:]
            cand_idx.append(np.stack(idx, axis=1))
            cand_side.append(np.full(len(flat), side))
            cand_val.append(vals.ravel()[flat])

    idx = np.concatenate(cand_idx)
    side = np.concatenate(cand_side)
    val = np.concatenate(cand_val)
    keep = val >= best - _SCREEN_TOL
    idx, side = idx[keep], side[keep]

    exact_best = None
    for corner, s in zip(idx.tolist(), side.tolist()):
        g = tuple(cols[i][0][a] for i, a in enumerate(corner))
        vol = math.prod(g, start=Fraction(1))
        if s == 0:
            count = int(hist[tuple(a + 1 for a in corner)])
            value = Fraction(count, N) - vol
        else:
            count = int(hist[tuple(corner)])
            value = vol - Fraction(count, N)
        key = (-value, tuple(corner), s)
        if exact_best is None or key < exact_best[0]:
            exact_best = (key, value, g, SIDES[s])
    _, value, g, s = exact_best
    return DiscrepancyResult(value, g, s, N, d)


def range_discrepancy(P, M: int, N: int, budget: int = DEFAULT_BUDGET) -> DiscrepancyResult:
    """Star discrepancy of points ``M+1 .. N`` (1-based)."""
    P = as_point_set(P)
    if not 0 <= M < N:
        raise ValueError(f"need 0 <= M < N, got M={M}, N={N}")
    if N > P.N:
        raise ValueError(f"N={N} exceeds the {P.N} available points")
    return star_discrepancy_exact(P.select(range(M + 1, N + 1)), budget=budget)


def subsequence_indices(N: int, kappa: int, gamma: int) -> list[int]:
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    mod = 1 << kappa
    if not 0 <= gamma < mod:
        raise ValueError(f"gamma must lie in [0, {mod}), got {gamma}")
    first = gamma if gamma else mod
    return list(range(first, N + 1, mod))


def subsequence(P, kappa: int, gamma: int) -> PointSet:
    """Points ``x_n`` with ``n == gamma (mod 2**kappa)``, 1 <= n <= N, in order."""
    P = as_point_set(P)
    return P.select(subsequence_indices(P.N, kappa, gamma), kappa=kappa, gamma=gamma)


def compose_bound(M: int, N: int, D_M, D_MN) -> Fraction | float:
    """Upper bound ``(M D_M + (N-M) D_{M,N}) / N`` on the discrepancy of the
    first ``N`` points.  ``D_M`` is ignored when ``M == 0``."""
    if not 0 <= M < N:
        raise ValueError(f"need 0 <= M < N, got M={M}, N={N}")
    head = 0 if M == 0 else M * D_M
    return (head + (N - M) * D_MN) / N


def reverse_compose_bound(M: int, N: int, D_N, D_M) -> Fraction | float:
    """Upper bound ``(N D_N + M D_M) / (N-M)`` on the discrepancy of points
    ``M+1 .. N``."""
    if not 0 <= M < N:
        raise ValueError(f"need 0 <= M < N, got M={M}, N={N}")
    head = 0 if M == 0 else M * D_M
    return (N * D_N + head) / (N - M)
