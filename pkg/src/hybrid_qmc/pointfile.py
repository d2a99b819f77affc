"""Point-set files: CSV of exact rationals, plus an optional digit sidecar.

Each coordinate is written as ``numerator/denominator`` (``0`` for zero);
base-p rationals have no finite decimal expansion, so fractions are the
lossless text form.  Reading also accepts decimals.
"""
from __future__ import annotations

import io
import json
import re
from fractions import Fraction
from typing import TextIO

from .pointgen import DigitTape, ExactCoordinate, PointSet

__all__ = ["write_csv", "read_csv", "format_header", "cell_text", "digit_sidecar"]

_HEADER = re.compile(r"^#\s*(.*)$")


def format_header(d: int, n: int, mode: str, seed) -> str:
    return f"# d={d} n={n} mode={mode} seed={seed}"


def cell_text(c) -> str:
    q = c.to_fraction() if isinstance(c, ExactCoordinate) else Fraction(c)
    return str(q)


def write_csv(P: PointSet, out: TextIO, mode: str, seed) -> None:
    out.write(format_header(P.d, P.N, mode, seed) + "\n")
    for row in P.points:
        out.write(",".join(cell_text(c) for c in row) + "\n")


def read_csv(src: TextIO | str) -> tuple[PointSet, dict]:
    """Parse a point CSV; returns the points and the header fields."""
    if isinstance(src, str):
        src = io.StringIO(src)
    meta: dict = {}
    rows = []
    for lineno, line in enumerate(src, start=1):
        line = line.strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            for tok in m.group(1).split():
                key, eq, val = tok.partition("=")
                if eq:
                    meta[key] = val
            continue
        try:
            rows.append(tuple(Fraction(c.strip()) for c in line.split(",")))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"line {lineno}: bad coordinate ({exc})") from None
    if not rows:
        raise ValueError("no points in file")
    d = len(rows[0])
    if any(len(r) != d for r in rows):
        raise ValueError("rows have different lengths")
    if "d" in meta and int(meta["d"]) != d:
        raise ValueError(f"header says d={meta['d']} but rows have {d} coordinates")
    if "n" in meta and int(meta["n"]) != len(rows):
        raise ValueError(f"header says n={meta['n']} but file has {len(rows)} rows")
    return PointSet.from_rows(rows, d=d), meta


def digit_sidecar(P: PointSet, mode: str, seed) -> str:
    """JSON with every coordinate's base-b digits and, for random
    generators, the digit tapes each column consumed."""
    columns = []
    budget = P.provenance.get("budget")
    kind = P.provenance.get("kind", mode)
    if budget is not None:
        # hybrid: column 1 base 3, columns i >= 2 base 2, stream i
        for i, used in enumerate(budget.per_column, start=1):
            base = 3 if i == 1 else 2
            columns.append(_tape_record(base, int(seed), i, used))
    elif kind == "rhalton":
        H = P.provenance["H"]
        for i, base in enumerate(P.provenance["bases"], start=1):
            columns.append(_tape_record(base, int(seed), i, H))
    points = []
    for row in P.points:
        points.append([
            {"base": c.base, "digits": list(c.digits)} if isinstance(c, ExactCoordinate)
            else {"value": str(c)}
            for c in row
        ])
    doc = {"d": P.d, "n": P.N, "mode": mode, "seed": seed, "tapes": columns, "points": points}
    return json.dumps(doc, separators=(",", ":"))


def _tape_record(base: int, seed: int, stream: int, consumed: int) -> dict:
    digits = DigitTape(base, seed, stream).draw(consumed)
    return {"base": base, "seed": seed, "stream": stream, "consumed": consumed, "digits": list(digits)}
