"""δ-bracketing covers of the unit cube and cover-certified discrepancy.

A bracket (v, w) stands for the set difference [0, w) minus [0, v); its weight
is ``prod(w) - prod(v)``.  A δ-cover brackets every point of [0,1)^d with
brackets of weight at most δ.  Covers come in two shapes:

* product covers, one list of intervals per axis, every combination a
  bracket (this is what :func:`build_cover` and :func:`dyadic_snap_cover`
  produce; sizes like 512**4 stay cheap because nothing is materialised);
* explicit covers, a plain list of brackets.
"""
from __future__ import annotations

import itertools
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .discrepancy import as_point_set, local_discrepancy

__all__ = [
    "Bracket",
    "BracketingCover",
    "CoverReport",
    "CoverInterval",
    "build_cover",
    "grid_size",
    "cover_size_bound",
    "snapped_size_bound",
    "snapped_size_bound_sqrt5",
    "dyadic_snap_cover",
    "validate_cover",
    "cover_discrepancy_interval",
    "snap_exponents",
]

_INT_LIMIT = 2**62


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class Bracket:
    v: tuple
    w: tuple

    def __post_init__(self):
        v = tuple(_frac(a) for a in self.v)
        w = tuple(_frac(b) for b in self.w)
        if len(v) != len(w) or not v:
            raise ValueError("bracket corners must have the same positive dimension")
        for a, b in zip(v, w):
            if not 0 <= a <= b <= 1:
                raise ValueError(f"need 0 <= v <= w <= 1 componentwise, got {a}, {b}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @property
    def d(self) -> int:
        return len(self.v)

    @property
    def weight(self) -> Fraction:
        return math.prod(self.w, start=Fraction(1)) - math.prod(self.v, start=Fraction(1))

    def contains(self, x) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.v, x, self.w))


@dataclass(frozen=True)
class BracketingCover:
    """A finite set of brackets, either product-structured or explicit.

    For a product cover ``axes[i]`` lists the (lo, hi) intervals of axis i
    and the brackets are all combinations.
    """

    d: int
    delta: Fraction
    axes: tuple | None = None
    brackets: tuple | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if (self.axes is None) == (self.brackets is None):
            raise ValueError("give exactly one of axes or brackets")
        object.__setattr__(self, "delta", _frac(self.delta))
        if self.axes is not None:
            axes = tuple(tuple((_frac(a), _frac(b)) for a, b in ax) for ax in self.axes)
            if len(axes) != self.d:
                raise ValueError(f"expected {self.d} axes, got {len(axes)}")
            for ax in axes:
                if not ax:
                    raise ValueError("empty axis")
                for a, b in ax:
                    if not 0 <= a <= b <= 1:
                        raise ValueError(f"bad axis interval ({a}, {b})")
            object.__setattr__(self, "axes", axes)
        else:
            br = tuple(b if isinstance(b, Bracket) else Bracket(*b) for b in self.brackets)
            if any(b.d != self.d for b in br):
                raise ValueError("bracket dimension mismatch")
            object.__setattr__(self, "brackets", br)

    @property
    def is_product(self) -> bool:
        return self.axes is not None

    def __len__(self) -> int:
        if self.is_product:
            return math.prod(len(ax) for ax in self.axes)
        return len(self.brackets)

    def __iter__(self) -> Iterator[Bracket]:
        if not self.is_product:
            yield from self.brackets
            return
        for combo in itertools.product(*self.axes):
            yield Bracket(tuple(c[0] for c in combo), tuple(c[1] for c in combo))

    def explicit(self, limit: int = 1 << 20) -> "BracketingCover":
        if not self.is_product:
            return self
        if len(self) > limit:
            raise ValueError(f"cover has {len(self)} brackets, above the limit {limit}")
        return BracketingCover(self.d, self.delta, brackets=tuple(self), info=dict(self.info))

    def without(self, index: int) -> "BracketingCover":
        """Explicit copy with bracket ``index`` removed."""
        br = list(self.explicit().brackets)
        del br[index]
        return BracketingCover(self.d, self.delta, brackets=tuple(br))

    def with_delta(self, delta) -> "BracketingCover":
        if self.is_product:
            return BracketingCover(self.d, delta, axes=self.axes, info=dict(self.info))
        return BracketingCover(self.d, delta, brackets=self.brackets, info=dict(self.info))

    def max_weight(self) -> tuple[Fraction, Bracket]:
        """Exact largest bracket weight and a bracket attaining it."""
        if not self.is_product:
            best = max(self.brackets, key=lambda b: b.weight)
            return best.weight, best
        axes = [_weight_candidates(ax) for ax in self.axes]
        dens = [math.lcm(*(x.denominator for iv in ax for x in iv)) for ax in axes]
        total = math.prod(dens)
        if total < _INT_LIMIT:
            size = max(len(ax) for ax in axes)
            lo = np.zeros((self.d, size), dtype=np.int64)
            hi = np.zeros((self.d, size), dtype=np.int64)
            for i, (ax, den) in enumerate(zip(axes, dens)):
                lo[i, : len(ax)] = [int(a * den) for a, _ in ax]
                hi[i, : len(ax)] = [int(b * den) for _, b in ax]
            sizes = np.array([len(ax) for ax in axes], dtype=np.int64)
            num, arg = _kernels.product_max_weight(hi, lo, sizes)
            combo = [axes[i][a] for i, a in enumerate(arg.tolist())]
            b = Bracket(tuple(c[0] for c in combo), tuple(c[1] for c in combo))
            return Fraction(int(num), total), b
        reduced = BracketingCover(self.d, self.delta, axes=axes)
        best = max(reduced, key=lambda b: b.weight)
        return best.weight, best

    def to_dict(self) -> dict:
        w, _ = self.max_weight()
        out = {
            "d": self.d,
            "delta": str(self.delta),
            "count": len(self),
            "max_weight": float(w),
            "max_weight_exact": str(w),
            "product": self.is_product,
        }
        out.update(self.info)
        return out


def cover_size_bound(d: int, delta) -> float:
    """Cardinality bound ½(2e)^d (1/δ + 1)^d for some δ-cover."""
    return 0.5 * (2 * math.e) ** d * (1 / float(delta) + 1) ** d


def snapped_size_bound(d: int, h: int) -> float:
    """½(2e)^d (2^{h+2} + 1)^d."""
    return 0.5 * (2 * math.e) ** d * (2 ** (h + 2) + 1) ** d


def snapped_size_bound_sqrt5(d: int, h: int) -> float:
    """(√5)^{(h+3) d}."""
    return math.sqrt(5) ** ((h + 3) * d)


def _weight_candidates(ax) -> tuple:
    """Axis intervals that can appear in a heaviest bracket of a product cover.

    With the other axes fixed, a bracket's weight is ``A·w - B·v`` with
    ``A >= B >= 0``, i.e. proportional to ``w - r·v`` for some r in [0, 1].
    Each axis can therefore be restricted to the vertices of the upper hull
    of its (v, w) points that maximize ``w - r·v`` for some such r.
    """
    pts = sorted(set(ax))
    hull: list[tuple[Fraction, Fraction]] = []
    for v, w in pts:
        while hull and hull[-1][0] == v:
            hull.pop()  # same v, larger w wins
        while len(hull) >= 2:
            (v1, w1), (v2, w2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly above the chord
            if (w2 - w1) * (v - v1) <= (w - w1) * (v2 - v1):
                hull.pop()
            else:
                break
        hull.append((v, w))
    slope = lambda p, q: (q[1] - p[1]) / (q[0] - p[0])
    keep = []
    for k, p in enumerate(hull):
        s_in = slope(hull[k - 1], p) if k else None    # None: +inf
        s_out = slope(p, hull[k + 1]) if k + 1 < len(hull) else None  # None: -inf
        if (s_in is None or s_in >= 0) and (s_out is None or s_out <= 1):
            keep.append(p)
    return tuple(keep)


def grid_size(d: int, delta, dyadic: bool = False) -> int:
    """Smallest K with ``1 - (1 - 1/K)^d <= δ`` (a power of two if ``dyadic``)."""
    delta = _frac(delta)
    ok = lambda K: (K - 1) ** d >= (1 - delta) * K**d
    lo, hi = 1, max(1, math.ceil(d / delta))
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    if dyadic:
        lo = 1 << (lo - 1).bit_length()
    return lo


def build_cover(d: int, delta, dyadic: bool = False) -> BracketingCover:
    """Uniform product grid with K intervals per axis, K from :func:`grid_size`.

    The largest bracket is the top corner cell with weight ``1 - (1-1/K)^d``.
    For d = 1 this is the grid of ⌈1/δ⌉ intervals of length at most δ.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    delta = _frac(delta)
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    K = grid_size(d, delta, dyadic)
    axis = tuple((Fraction(k, K), Fraction(k + 1, K)) for k in range(K))
    count = K**d
    bound = cover_size_bound(d, delta)
    info = {"grid": K, "dyadic": dyadic, "size_bound": bound, "bound_met": count <= bound}
    return BracketingCover(d, delta, axes=(axis,) * d, info=info)


def snap_exponents(d: int, h: int) -> list[tuple[int, int]]:
    """Per axis i (1-based): log2 of the lower and upper snapping denominators."""
    out = []
    for i in range(1, d + 1):
        c = (i - 1).bit_length() + 1  # ceil(log2 i) + 1
        out.append((c * (h + 1), c * (h + 2)))
    return out


def _floor_to(x: Fraction, e: int) -> Fraction:
    return Fraction(math.floor(x * (1 << e)), 1 << e)


def _ceil_to(x: Fraction, e: int) -> Fraction:
    return Fraction(math.ceil(x * (1 << e)), 1 << e)


def _axis_coverage_gap(ax) -> Fraction | None:
    """First point of [0, 1] not covered by the union of closed intervals."""
    reach = None
    for a, b in sorted(ax):
        if reach is None:
            if a > 0:
                return Fraction(0)
            reach = b
        elif a > reach:
            return reach
        else:
            reach = max(reach, b)
    return None if reach == 1 else reach


def _is_valid_at(cover: BracketingCover, delta: Fraction) -> tuple[bool, str]:
    w, _ = cover.max_weight()
    if w > delta:
        return False, f"a bracket has weight {w} > {delta}"
    if cover.is_product:
        for i, ax in enumerate(cover.axes):
            gap = _axis_coverage_gap(ax)
            if gap is not None:
                return False, f"axis {i + 1} leaves {gap} uncovered"
        return True, ""
    report = validate_cover(cover, delta, samples=1000)
    if report.uncovered:
        return False, f"uncovered point {report.uncovered[0]}"
    return True, ""


def dyadic_snap_cover(cover: BracketingCover, h: int) -> BracketingCover:
    """Snap a 2^-(h+2)-cover onto coordinate-dependent dyadic grids.

    Axis i (1-based) has c = ⌈log2 i⌉ + 1; lower corners are floored to
    multiples of 2^-(c(h+1)), upper corners ceiled to multiples of 2^-(c(h+2)).
    Snapping only enlarges brackets, so the result still covers; whether
    the weights stay below 2^-h depends on the input and is checked by
    :func:`validate_cover`.
    """
    if h < 1:
        raise ValueError(f"h must be >= 1, got {h}")
    target = Fraction(1, 1 << (h + 2))
    ok, why = _is_valid_at(cover, target)
    if not ok:
        raise ValueError(f"input is not a valid 2^-{h + 2}-cover: {why}")
    exps = snap_exponents(cover.d, h)
    delta = Fraction(1, 1 << h)
    info = {"h": h, "input_count": len(cover)}
    if cover.is_product:
        axes = []
        for ax, (el, eu) in zip(cover.axes, exps):
            snapped = dict.fromkeys((_floor_to(a, el), _ceil_to(b, eu)) for a, b in ax)
            axes.append(tuple(snapped))
        return BracketingCover(cover.d, delta, axes=tuple(axes), info=info)
    seen = dict.fromkeys(
        (
            tuple(_floor_to(a, el) for a, (el, _) in zip(b.v, exps)),
            tuple(_ceil_to(c, eu) for c, (_, eu) in zip(b.w, exps)),
        )
        for b in cover.brackets
    )
    return BracketingCover(cover.d, delta, brackets=tuple(Bracket(v, w) for v, w in seen), info=info)


@dataclass
class CoverReport:
    delta: Fraction
    count: int
    max_weight: Fraction
    weight_violations: list = field(default_factory=list)
    uncovered: list = field(default_factory=list)
    checked: int = 0

    @property
    def failures(self) -> int:
        return len(self.weight_violations) + len(self.uncovered)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def to_dict(self, limit: int = 10) -> dict:
        return {
            "delta": str(self.delta),
            "count": self.count,
            "max_weight": float(self.max_weight),
            "max_weight_exact": str(self.max_weight),
            "checked_points": self.checked,
            "failures": self.failures,
            "weight_violations": [
                {"v": [str(a) for a in b.v], "w": [str(a) for a in b.w], "weight": str(b.weight)}
                for b in self.weight_violations[:limit]
            ],
            "uncovered": [[str(a) for a in x] for x in self.uncovered[:limit]],
        }


def _lattice(d: int, m: int) -> np.ndarray:
    """Cell midpoints (k + 1/2)/m, k < m, on every axis: an m^d lattice."""
    axis = (np.arange(m) + 0.5) / m
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def validate_cover(cover: BracketingCover, delta, samples: int = 10_000, seed: int = 0,
                   max_witnesses: int = 100) -> CoverReport:
    """Check bracket weights exactly and the cover property on test points.

    The test points are ``samples`` uniform pseudo-random points plus the
    midpoint lattice with ⌈1/δ⌉+1 points per axis.  Float coordinates are
    dyadic rationals, so containment tests against rational corners are
    done exactly.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    delta = _frac(delta)
    d = cover.d
    max_w, _ = cover.max_weight()
    violations: list[Bracket] = []
    if max_w > delta:
        if cover.is_product and len(cover) > 1 << 16:
            violations.append(cover.max_weight()[1])
        else:
            violations = [b for b in cover if b.weight > delta][:max_witnesses]

    m = math.ceil(1 / delta) + 1
    pts = np.random.default_rng(seed).random((samples, d))
    if m**d <= 1 << 22:
        pts = np.concatenate([_lattice(d, m), pts])
    covered = _covered(cover, pts)
    missing = np.flatnonzero(~covered)[:max_witnesses]
    uncovered = [tuple(Fraction(float(c)) for c in pts[k]) for k in missing]
    return CoverReport(delta, len(cover), max_w, violations, uncovered, len(pts))


def _covered(cover: BracketingCover, pts: np.ndarray) -> np.ndarray:
    """Exact containment: float coordinates compared against Fraction corners
    via integer numerators on a per-axis common denominator."""
    n, d = pts.shape
    exact = [[Fraction(float(c)) for c in pts[:, i]] for i in range(d)]
    if cover.is_product:
        ok = np.ones(n, dtype=bool)
        for i, ax in enumerate(cover.axes):
            merged = _merged(ax)
            starts = [a for a, _ in merged]
            col = np.zeros(n, dtype=bool)
            for k, x in enumerate(exact[i]):
                j = bisect_right(starts, x) - 1
                col[k] = j >= 0 and x <= merged[j][1]
            ok &= col
        return ok
    ok = np.zeros(n, dtype=bool)
    for b in cover.brackets:
        inside = np.ones(n, dtype=bool)
        for i in range(d):
            col = pts[:, i]
            # floats are exact dyadics; compare in float only when the corner
            # is exactly representable, else fall back to Fractions
            lo, hi = b.v[i], b.w[i]
            if Fraction(float(lo)) == lo and Fraction(float(hi)) == hi:
                inside &= (col >= float(lo)) & (col <= float(hi))
            else:
                inside &= np.array([lo <= x <= hi for x in exact[i]])
        ok |= inside
    return ok


def _merged(ax):
    out = []
    for a, b in sorted(ax):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


@dataclass(frozen=True)
class CoverInterval:
    """Certified enclosure ``lo <= D*(P) <= hi`` with ``hi - lo = δ``."""

    lo: Fraction
    hi: Fraction
    delta: Fraction
    witness: tuple
    cover_size: int
    N: int
    d: int

    def to_dict(self) -> dict:
        return {
            "lo": float(self.lo),
            "hi": float(self.hi),
            "lo_exact": str(self.lo),
            "hi_exact": str(self.hi),
            "delta": str(self.delta),
            "witness": [str(c) for c in self.witness],
            "cover_size": self.cover_size,
            "N": self.N,
            "d": self.d,
        }


def _lattice_max(P, values: Sequence[Sequence[Fraction]]):
    """Exact max of |open local discrepancy| over the product lattice."""
    fr = P.fractions
    N, d = P.N, P.d
    dens = [math.lcm(*(v.denominator for v in vals)) for vals in values]
    D = math.prod(dens)
    if N * D >= _INT_LIMIT:
        raise OverflowError(
            f"lattice denominators too large for exact int64 evaluation (N*D = {N * D})"
        )
    size = max(len(v) for v in values)
    nums = np.zeros((d, size), dtype=np.int64)
    q = np.empty((N, d), dtype=np.int64)
    for i, (vals, den) in enumerate(zip(values, dens)):
        ints = [int(v * den) for v in vals]
        nums[i, : len(ints)] = ints
        # x < v  <=>  floor(x * den) < v * den
        floors = np.fromiter(
            ((p[i].numerator * den) // p[i].denominator for p in fr), dtype=np.int64, count=N
        )
        q[:, i] = np.searchsorted(np.asarray(ints, dtype=np.int64), floors, side="right")
    sizes = np.array([len(v) for v in values], dtype=np.int64)
    best, corner, _ = _kernels.lattice_max_abs_disc(q, nums, sizes, D, N)
    witness = tuple(values[i][a] for i, a in enumerate(corner.tolist()))
    return Fraction(int(best), N * D), witness


def cover_discrepancy_interval(P, delta, cover: BracketingCover | None = None) -> CoverInterval:
    """Interval ``[lo, lo + δ]`` containing the star discrepancy of ``P``.

    ``lo`` is the largest |local discrepancy| over all bracket corners; any
    anchored box lies between the corners of a bracket containing its upper
    corner, which gives the upper end.  Product covers are evaluated by an
    exact branch and bound over the corner lattice, so a 512^4 lattice is
    fine.
    """
    P = as_point_set(P)
    delta = _frac(delta)
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if P.N < 1:
        raise ValueError("empty point set")
    if cover is None:
        cover = build_cover(P.d, delta)
    if cover.d != P.d:
        raise ValueError(f"cover has dimension {cover.d}, points have {P.d}")
    w, _ = cover.max_weight()
    if w > delta:
        raise ValueError(f"cover has a bracket of weight {w} > {delta}")

    if cover.is_product:
        lows = [sorted({a for a, _ in ax}) for ax in cover.axes]
        highs = [sorted({b for _, b in ax}) for ax in cover.axes]
        best, witness = _lattice_max(P, highs)
        # lower corners with a zero coordinate have discrepancy 0; the rest
        # are already upper corners when every nonzero lower value is one
        if not all(set(lo) - {0} <= set(hi) for lo, hi in zip(lows, highs)):
            cand, wit = _lattice_max(P, lows)
            if cand > best:
                best, witness = cand, wit
    else:
        corners = dict.fromkeys(c for b in cover.brackets for c in (b.v, b.w))
        best, witness = Fraction(0), next(iter(corners))
        for c in corners:
            if any(x == 0 for x in c):
                continue
            val = abs(local_discrepancy(P, c))
            if val > best:
                best, witness = val, c
    return CoverInterval(best, best + delta, delta, witness, len(cover), P.N, P.d)
