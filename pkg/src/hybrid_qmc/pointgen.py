"""Exact-digit generation of Halton, randomized Halton, doubling-map and
hybrid matrix point sequences.

Every coordinate is an :class:`ExactCoordinate`, a finite digit expansion in a
fixed base, so the von Neumann-Kakutani transform and the doubling map act on
digits without rounding.  Random digits come from seeded :class:`DigitTape`
streams which count every digit they hand out; this is what
:func:`digit_budget` reports.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "ExactCoordinate",
    "DigitTape",
    "PointSet",
    "HybridMatrixGenerator",
    "DigitBudget",
    "odd_primes",
    "shift_for_column",
    "radical_inverse",
    "kakutani_step",
    "doubling_step",
    "halton_stream",
    "randomized_halton",
    "hybrid_matrix",
    "digit_budget",
]

MODES = ("practical", "faithful")
DEFAULT_PRECISION = 64


@total_ordering
class ExactCoordinate:
    """A number in [0, 1) written as ``sum(digits[j] * base**-(j+1))``.

    Trailing zero digits are insignificant: equality and hashing use the
    zero-stripped expansion.
    """

    def __init__(self, base: int, digits: Iterable[int] = ()):
        base = int(base)
        if base < 2:
            raise ValueError(f"base must be >= 2, got {base}")
        digits = tuple(int(a) for a in digits)
        for a in digits:
            if not 0 <= a < base:
                raise ValueError(f"digit {a} out of range for base {base}")
        self.base = base
        self.digits = digits
        end = len(digits)
        while end and digits[end - 1] == 0:
            end -= 1
        self._key = digits[:end]

    @classmethod
    def zero(cls, base: int) -> "ExactCoordinate":
        return cls(base, ())

    @classmethod
    def from_fraction(cls, value, base: int, max_digits: int | None = None) -> "ExactCoordinate":
        """Digit expansion of a rational in [0, 1).

        Raises ``ValueError`` if the expansion does not terminate within
        ``max_digits`` digits (unbounded when ``None`` and the denominator
        divides a power of ``base``).
        """
        q = Fraction(value)
        if not 0 <= q < 1:
            raise ValueError(f"{q} is not in [0, 1)")
        digits = []
        while q:
            if max_digits is not None and len(digits) >= max_digits:
                raise ValueError(f"{value} has no {max_digits}-digit expansion in base {base}")
            if max_digits is None and len(digits) > 4096:
                raise ValueError(f"{value} has no finite expansion in base {base}")
            q *= base
            a = q.numerator // q.denominator
            digits.append(a)
            q -= a
        return cls(base, digits)

    @property
    def numerator(self) -> int:
        """Integer ``n`` with value ``n / base**len(digits)``."""
        if not self.digits:
            return 0
        if self.base <= 36:
            return int("".join(_DIGIT_CHARS[a] for a in self.digits), self.base)
        n = 0
        for a in self.digits:
            n = n * self.base + a
        return n

    @cached_property
    def _fraction(self) -> Fraction:
        if not self._key:
            return Fraction(0)
        trimmed = ExactCoordinate(self.base, self._key)
        return Fraction(trimmed.numerator, self.base ** len(self._key))

    def to_fraction(self) -> Fraction:
        return self._fraction

    def __float__(self) -> float:
        # Fraction -> float is correctly rounded, hence monotone.
        return float(self._fraction)

    def __eq__(self, other):
        if isinstance(other, ExactCoordinate):
            if other.base == self.base:
                return self._key == other._key
            return self._fraction == other._fraction
        if isinstance(other, (int, Fraction)):
            return self._fraction == other
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, ExactCoordinate):
            return self._fraction < other._fraction
        if isinstance(other, (int, Fraction)):
            return self._fraction < other
        return NotImplemented

    def __hash__(self):
        return hash(self._fraction)

    def __repr__(self):
        return f"ExactCoordinate(base={self.base}, digits={self.digits!r})"

    def __str__(self):
        return str(self._fraction)


_DIGIT_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"


def _coerce(value) -> "ExactCoordinate | Fraction":
    if isinstance(value, (ExactCoordinate, Fraction)):
        return value
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


def as_fraction(value) -> Fraction:
    if isinstance(value, ExactCoordinate):
        return value.to_fraction()
    return Fraction(value)


class DigitTape:
    """Seeded stream of uniform base-``base`` digits.

    Digits are cut out of 64-bit words from a PCG64 stream (rejection keeps
    them uniform for bases that are not powers of two), so the stream does not
    depend on how it is consumed.  ``consumed`` counts digits handed out.
    """

    def __init__(self, base: int, seed: int, stream: int | Sequence[int] = ()):
        if base < 2:
            raise ValueError(f"base must be >= 2, got {base}")
        self.base = int(base)
        self.seed = int(seed)
        self.stream = (stream,) if isinstance(stream, int) else tuple(stream)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self._bitgen = np.random.PCG64(seq)
        self._per_word = int(math.floor(64 / math.log2(self.base) + 1e-12))
        while self.base ** self._per_word > 2**64:
            self._per_word -= 1
        span = self.base ** self._per_word
        self._span = span
        self._limit = span * (2**64 // span)
        self._buffer: deque[int] = deque()
        self.consumed = 0

    def _refill(self):
        while True:
            word = int(self._bitgen.random_raw())
            if word < self._limit:
                break
        word %= self._span
        chunk = []
        for _ in range(self._per_word):
            word, a = divmod(word, self.base)
            chunk.append(a)
        self._buffer.extend(reversed(chunk))

    def draw(self, k: int) -> tuple[int, ...]:
        if k < 0:
            raise ValueError("cannot draw a negative number of digits")
        while len(self._buffer) < k:
            self._refill()
        out = tuple(self._buffer.popleft() for _ in range(k))
        self.consumed += k
        return out

    def __repr__(self):
        return f"DigitTape(base={self.base}, seed={self.seed}, stream={self.stream}, consumed={self.consumed})"


def odd_primes(count: int) -> list[int]:
    """The first ``count`` odd primes (3, 5, 7, 11, ...)."""
    if count <= 0:
        return []
    # p_k < k (ln k + ln ln k) for k >= 6; +1 because 2 is skipped
    k = count + 1
    limit = 16 if k < 6 else int(k * (math.log(k) + math.log(math.log(k)))) + 3
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    primes = np.flatnonzero(sieve)
    return [int(p) for p in primes[1 : count + 1]]


def shift_for_column(i: int) -> int:
    """Doubling exponent ``ceil(log2(i)) + 1`` of column ``i`` (1-based)."""
    if i < 1:
        raise ValueError("columns are numbered from 1")
    return (i - 1).bit_length() + 1


def radical_inverse(n: int, base: int) -> ExactCoordinate:
    """Digit reversal of ``n`` in ``base``: n = sum a_j b^j -> sum a_j b^-(j+1)."""
    if base < 2:
        raise ValueError(f"base must be >= 2, got {base}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    digits = []
    while n:
        n, a = divmod(n, base)
        digits.append(a)
    return ExactCoordinate(base, digits)


def kakutani_step(x: ExactCoordinate) -> ExactCoordinate:
    """Von Neumann-Kakutani transform: add one to the leading digit with
    carry to the right."""
    p = x.base
    digits = list(x.digits)
    m = 0
    while m < len(digits) and digits[m] == p - 1:
        m += 1
    if m == len(digits):
        # a finite tape is padded with zeros, so the carry lands past the end
        digits.append(0)
    digits[:m] = [0] * m
    digits[m] += 1
    return ExactCoordinate(p, digits)


def doubling_step(x: ExactCoordinate, k: int, tape: DigitTape | None = None) -> ExactCoordinate:
    """Fractional part of ``2**k * x`` as a left shift of the binary tape.

    With a ``tape`` the window keeps its length: ``k`` fresh digits are drawn
    and appended (and counted by the tape).
    """
    if x.base != 2:
        raise ValueError("doubling_step needs a binary coordinate")
    if k < 1:
        raise ValueError(f"shift must be >= 1, got {k}")
    if tape is None:
        return ExactCoordinate(2, x.digits[k:])
    if tape.base != 2:
        raise ValueError("doubling_step needs a binary tape")
    return ExactCoordinate(2, (x.digits + tape.draw(k))[k:])


@dataclass(frozen=True)
class PointSet:
    """Ordered finite list of points in [0, 1)^d with exact coordinates.

    Coordinates are :class:`ExactCoordinate` or :class:`fractions.Fraction`.
    """

    points: tuple
    d: int
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = tuple(tuple(_coerce(c) for c in p) for p in self.points)
        for p in pts:
            if len(p) != self.d:
                raise ValueError(f"point {p} does not have dimension {self.d}")
            for c in p:
                if not 0 <= as_fraction(c) < 1:
                    raise ValueError(f"coordinate {c} outside [0, 1)")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_rows(cls, rows, d: int | None = None, provenance: dict | None = None) -> "PointSet":
        rows = [tuple(r) if isinstance(r, (list, tuple)) else (r,) for r in rows]
        if d is None:
            if not rows:
                raise ValueError("cannot infer the dimension of an empty point set")
            d = len(rows[0])
        return cls(tuple(rows), d, dict(provenance or {}))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, idx):
        return self.points[idx]

    @property
    def N(self) -> int:
        return len(self.points)

    @cached_property
    def fractions(self) -> tuple[tuple[Fraction, ...], ...]:
        return tuple(tuple(as_fraction(c) for c in p) for p in self.points)

    def as_array(self) -> np.ndarray:
        """Float copy, shape (N, d)."""
        if not self.points:
            return np.zeros((0, self.d))
        return np.array([[float(c) for c in p] for p in self.fractions], dtype=float)

    def column_bases(self) -> list[int | None]:
        bases = []
        for i in range(self.d):
            found = {c.base for p in self.points for c in (p[i],) if isinstance(c, ExactCoordinate)}
            bases.append(found.pop() if len(found) == 1 else None)
        return bases

    def select(self, indices: Iterable[int], **extra) -> "PointSet":
        """Points at the given 1-based indices, in that order."""
        idx = list(indices)
        prov = dict(self.provenance)
        prov.update(extra)
        return PointSet(tuple(self.points[n - 1] for n in idx), self.d, prov)

    def head(self, n: int) -> "PointSet":
        return self.select(range(1, n + 1))

    def project(self, d: int) -> "PointSet":
        """First ``d`` columns."""
        if not 1 <= d <= self.d:
            raise ValueError(f"cannot project dimension {self.d} onto {d}")
        return PointSet(tuple(p[:d] for p in self.points), d, dict(self.provenance))

    def concat(self, other: "PointSet") -> "PointSet":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return PointSet(self.points + other.points, self.d, dict(self.provenance))


def halton_stream(bases: Sequence[int], n: int, x0=None) -> PointSet:
    """Orbit ``x_k = T(x_{k-1})``, k = 1..n, of the coordinatewise Kakutani map.

    ``x0=None`` starts at the origin, which gives the classical Halton sequence.
    """
    bases = [int(b) for b in bases]
    if not bases:
        raise ValueError("need at least one base")
    for b in bases:
        if b < 2:
            raise ValueError(f"base must be >= 2, got {b}")
    for i, a in enumerate(bases):
        for b in bases[i + 1 :]:
            if math.gcd(a, b) != 1:
                raise ValueError(f"bases {a} and {b} are not coprime")
    if n < 0:
        raise ValueError("n must be >= 0")
    if x0 is None:
        x = [ExactCoordinate.zero(b) for b in bases]
    else:
        x = []
        for b, c in zip(bases, x0, strict=True):
            if isinstance(c, ExactCoordinate):
                if c.base != b:
                    raise ValueError(f"start coordinate has base {c.base}, expected {b}")
                x.append(c)
            else:
                x.append(ExactCoordinate.from_fraction(c, b))
    rows = []
    for _ in range(n):
        x = [kakutani_step(c) for c in x]
        rows.append(tuple(x))
    return PointSet(tuple(rows), len(bases), {"kind": "halton", "bases": bases})


def randomized_halton(bases: Sequence[int], n: int, seed: int, H: int = DEFAULT_PRECISION) -> PointSet:
    """Kakutani orbit started at a uniform random point with ``H`` digits per
    coordinate.  The random point itself is the first row.

    Column ``j`` (1-based) draws from ``DigitTape(bases[j-1], seed, stream=j)``,
    the same tape the hybrid generator uses for its first column.
    """
    if H < 1:
        raise ValueError("H must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    start = [ExactCoordinate(b, DigitTape(b, seed, j).draw(H)) for j, b in enumerate(bases, start=1)]
    rest = halton_stream(bases, n - 1, x0=start)
    ps = PointSet((tuple(start),) + rest.points, len(bases))
    object.__setattr__(ps, "provenance", {"kind": "rhalton", "bases": list(bases), "seed": seed, "H": H})
    return ps


def _default_threshold(i: int) -> int:
    """Exponent ``e`` of the switch threshold ``2**e`` for column ``i``."""
    return 12 * 2**i


def _exceeds_power_of_two(value: int, exponent: int) -> bool:
    """``value > 2**exponent`` without materializing huge powers."""
    if value <= 0:
        return False
    if value.bit_length() <= exponent:
        return False
    return value > (1 << exponent)


class HybridMatrixGenerator:
    """Row-by-row generator of the hybrid matrix.

    Column 1 is a randomized Halton column in base 3.  Column ``i >= 2`` starts
    from ``H`` random bits and is doubled by ``2**k_i`` per row with
    ``k_i = ceil(log2 i) + 1``; each shift draws ``k_i`` fresh bits so the
    window keeps ``H`` digits.  In ``faithful`` mode column ``i`` switches to
    the Kakutani map in base ``p_i`` once ``n - 1 > 2**(12 * 2**i)``; in
    ``practical`` mode it never switches (the threshold is at least 2**48).

    ``threshold_exponent`` overrides ``i -> 12 * 2**i`` (faithful mode only)
    so the switch can be exercised in tests.
    """

    def __init__(
        self,
        d: int,
        seed: int,
        H: int = DEFAULT_PRECISION,
        mode: str = "practical",
        threshold_exponent: Callable[[int], int] | None = None,
    ):
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        if H < 1:
            raise ValueError(f"H must be >= 1, got {H}")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if threshold_exponent is not None and mode != "faithful":
            raise ValueError("a threshold override only applies in faithful mode")
        self.d = d
        self.seed = int(seed)
        self.H = H
        self.mode = mode
        self.primes = odd_primes(d)
        self.shifts = [0] + [shift_for_column(i) for i in range(2, d + 1)]
        self._threshold = threshold_exponent or _default_threshold
        self.tapes = [DigitTape(3, self.seed, 1)] + [DigitTape(2, self.seed, i) for i in range(2, d + 1)]
        self.halton_columns = [True] + [False] * (d - 1)
        self.switched_at: dict[int, int] = {}
        self.row: list[ExactCoordinate] | None = None
        self.n = 0

    def _uses_halton(self, i: int, n: int) -> bool:
        # which map produces row n+1 from row n
        if i == 1:
            return True
        if self.mode == "practical":
            return False
        return _exceeds_power_of_two(n - 1, self._threshold(i))

    def next_row(self) -> tuple[ExactCoordinate, ...]:
        if self.row is None:
            self.row = [tape.draw(self.H) for tape in self.tapes]
            self.row = [ExactCoordinate(t.base, digits) for t, digits in zip(self.tapes, self.row)]
            self.n = 1
            return tuple(self.row)
        n = self.n
        new = []
        for i, x in enumerate(self.row, start=1):
            if self._uses_halton(i, n):
                if x.base != self.primes[i - 1]:
                    x = self._switch(i, x)
                new.append(kakutani_step(x))
            else:
                new.append(doubling_step(x, self.shifts[i - 1], self.tapes[i - 1]))
        self.row = new
        self.n = n + 1
        return tuple(new)

    def _switch(self, i: int, x: ExactCoordinate) -> ExactCoordinate:
        # binary window -> first H base-p digits (truncation, no fresh digits)
        p = self.primes[i - 1]
        q = x.to_fraction()
        scaled = q * p**self.H
        num = scaled.numerator // scaled.denominator
        digits = []
        for _ in range(self.H):
            num, a = divmod(num, p)
            digits.append(a)
        self.switched_at[i] = self.n + 1
        return ExactCoordinate(p, reversed(digits))

    def rows(self, count: int) -> list[tuple[ExactCoordinate, ...]]:
        return [self.next_row() for _ in range(count)]

    def point_set(self, N: int) -> PointSet:
        if N < 1:
            raise ValueError(f"N must be >= 1, got {N}")
        if self.n:
            raise RuntimeError("generator already advanced; use a fresh instance")
        rows = self.rows(N)
        prov = {"kind": f"hybrid-{self.mode}", "d": self.d, "seed": self.seed, "H": self.H}
        return PointSet(tuple(rows), self.d, prov)


@dataclass(frozen=True)
class DigitBudget:
    per_column: tuple[int, ...]
    total: int
    naive_total: int
    bound: int
    rows: int

    @property
    def within_bound(self) -> bool:
        return self.total <= self.bound


def digit_budget(gen: HybridMatrixGenerator) -> DigitBudget:
    """Random digits drawn so far versus the ``d*H*N`` cost of fresh points.

    ``bound`` is ``d*H + (ceil(log2 d) + 1) * d * N``.
    """
    per_column = tuple(t.consumed for t in gen.tapes)
    d, N = gen.d, gen.n
    return DigitBudget(
        per_column=per_column,
        total=sum(per_column),
        naive_total=d * gen.H * N,
        bound=d * gen.H + shift_for_column(d) * d * N,
        rows=N,
    )


def hybrid_matrix(
    d: int,
    N: int,
    seed: int,
    H: int = DEFAULT_PRECISION,
    mode: str = "practical",
    threshold_exponent: Callable[[int], int] | None = None,
) -> PointSet:
    """First ``N`` rows and ``d`` columns of the hybrid matrix.

    The digit budget of the run is stored under ``provenance["budget"]``.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    gen = HybridMatrixGenerator(d, seed, H=H, mode=mode, threshold_exponent=threshold_exponent)
    ps = gen.point_set(N)
    ps.provenance["budget"] = digit_budget(gen)
    return ps
