"""Seeded batch experiments over generators, dimensions and sizes.

Spec files are flat ``key = value`` text with comma lists::

    schema = hybrid-qmc-experiment/1
    generator = hybrid-practical
    d = 2, 3
    N = 64, 256
    seeds = 0..19
    measurements = exact, auto(1/128)
    bounds = hybrid_matrix
    epsilon = 0.01

Every cell (seed, d, N) builds its own generator from its seed, so cells can
run in any order or concurrently and still produce identical rows.
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .bounds import halton_subseq_bound, hybrid_matrix_bound, subsequence_sqrt_bound
from .cover import cover_discrepancy_interval
from .discrepancy import DEFAULT_BUDGET, grid_work, star_discrepancy_exact, subsequence
from .pointgen import DEFAULT_PRECISION, PointSet, halton_stream, hybrid_matrix, odd_primes, randomized_halton

__all__ = [
    "SCHEMA",
    "GENERATORS",
    "BOUNDS",
    "Measurement",
    "ExperimentSpec",
    "ExperimentReport",
    "SpecParseError",
    "parse_spec",
    "make_points",
    "run_experiment",
    "emit_report",
    "ROW_FIELDS",
]

SCHEMA = "hybrid-qmc-experiment/1"
GENERATORS = ("halton", "rhalton", "hybrid-practical", "hybrid-faithful")
# bound name -> measurement kinds it applies to
BOUNDS = {
    "hybrid_matrix": ("exact", "interval", "auto"),
    "halton_subseq": ("subseq",),
    "subsequence_sqrt": ("subseq",),
}
ROW_FIELDS = (
    "seed", "d", "N", "generator", "measurement", "method", "status",
    "value", "lo", "hi", "bound_name", "bound", "pass", "normalized", "wall_time",
)


class SpecParseError(ValueError):
    """Spec text error; ``line`` is 1-based, 0 for whole-file problems."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class Measurement:
    kind: str  # exact | interval | auto | subseq
    arg: Fraction | int | None = None

    _PATTERN = re.compile(r"^(exact|interval|auto|subseq)(?:\((.*)\))?$")

    @classmethod
    def parse(cls, text: str) -> "Measurement":
        m = cls._PATTERN.match(text.strip())
        if not m:
            raise ValueError(f"unknown measurement {text!r}")
        kind, arg = m.group(1), m.group(2)
        if kind == "exact":
            if arg:
                raise ValueError("exact takes no argument")
            return cls(kind)
        if not arg:
            raise ValueError(f"{kind} needs an argument")
        if kind == "subseq":
            k = int(arg)
            if k < 0:
                raise ValueError("kappa must be >= 0")
            return cls(kind, k)
        delta = Fraction(arg.strip())
        if not 0 < delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        return cls(kind, delta)

    def __str__(self):
        return self.kind if self.arg is None else f"{self.kind}({self.arg})"


@dataclass(frozen=True)
class ExperimentSpec:
    generator: str
    d: tuple[int, ...]
    N: tuple[int, ...]
    seeds: tuple[int, ...]
    measurements: tuple[Measurement, ...]
    bounds: tuple[str, ...] = ("hybrid_matrix",)
    epsilon: float = 0.01
    bases: tuple[int, ...] | None = None
    H: int = DEFAULT_PRECISION
    budget: int = DEFAULT_BUDGET
    output: str | None = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        for name in ("d", "N", "seeds", "measurements"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if any(x < 1 for x in self.d) or any(x < 1 for x in self.N):
            raise ValueError("d and N values must be >= 1")
        for b in self.bounds:
            if b not in BOUNDS:
                raise ValueError(f"unknown bound {b!r}")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.bases is not None and len(self.bases) < max(self.d):
            raise ValueError(f"{len(self.bases)} bases given but d goes up to {max(self.d)}")

    def to_text(self) -> str:
        lines = [
            f"schema = {SCHEMA}",
            f"generator = {self.generator}",
            f"d = {_join(self.d)}",
            f"N = {_join(self.N)}",
            f"seeds = {_join(self.seeds)}",
            f"measurements = {', '.join(str(m) for m in self.measurements)}",
            f"bounds = {', '.join(self.bounds)}",
            f"epsilon = {self.epsilon!r}",
            f"H = {self.H}",
            f"budget = {self.budget}",
        ]
        if self.bases is not None:
            lines.append(f"bases = {_join(self.bases)}")
        if self.output is not None:
            lines.append(f"output = {self.output}")
        return "\n".join(lines) + "\n"


def _join(xs) -> str:
    return ", ".join(str(x) for x in xs)


def _int_list(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            raise ValueError("empty list item")
        a, dots, b = tok.partition("..")
        if dots:
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty range {tok}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(tok))
    return tuple(out)


def _split_measurements(text: str) -> list[str]:
    # commas inside parentheses do not separate items
    return [t for t in re.split(r",(?![^()]*\))", text) if t.strip()]


_KEYS = {"schema", "generator", "d", "N", "seeds", "measurements", "bounds", "epsilon",
         "bases", "H", "budget", "output"}


def parse_spec(text: str) -> ExperimentSpec:
    """Parse the key-value spec format; errors carry the offending line."""
    values: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not eq or not key:
            raise SpecParseError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        if key not in _KEYS:
            raise SpecParseError(lineno, f"unknown key {key!r}")
        if key in values:
            raise SpecParseError(lineno, f"duplicate key {key!r}")
        values[key] = (lineno, val)

    def get(key, conv, default=None, required=False):
        if key not in values:
            if required:
                raise SpecParseError(0, f"missing key {key!r}")
            return default
        lineno, val = values[key]
        try:
            return conv(val)
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecParseError(lineno, f"bad {key}: {exc}") from None

    schema = get("schema", str, SCHEMA)
    if schema != SCHEMA:
        raise SpecParseError(values["schema"][0], f"unsupported schema {schema!r} (expected {SCHEMA})")

    def generator(v):
        if v not in GENERATORS:
            raise ValueError(f"unknown generator kind {v!r}; choose from {', '.join(GENERATORS)}")
        return v

    def measurements(v):
        items = tuple(Measurement.parse(t) for t in _split_measurements(v))
        if not items:
            raise ValueError("no measurements")
        return items

    def bounds(v):
        names = tuple(t.strip() for t in v.split(",") if t.strip())
        for n in names:
            if n not in BOUNDS:
                raise ValueError(f"unknown bound {n!r}")
        return names

    kwargs = dict(
        generator=get("generator", generator, required=True),
        d=get("d", _int_list, required=True),
        N=get("N", _int_list, required=True),
        seeds=get("seeds", _int_list, required=True),
        measurements=get("measurements", measurements, required=True),
        bounds=get("bounds", bounds, ("hybrid_matrix",)),
        epsilon=get("epsilon", float, 0.01),
        bases=get("bases", _int_list),
        H=get("H", int, DEFAULT_PRECISION),
        budget=get("budget", int, DEFAULT_BUDGET),
        output=get("output", str),
    )
    try:
        return ExperimentSpec(**kwargs)
    except ValueError as exc:
        raise SpecParseError(0, str(exc)) from None


def make_points(generator: str, d: int, N: int, seed: int, bases=None, H: int = DEFAULT_PRECISION) -> PointSet:
    if generator not in GENERATORS:
        raise ValueError(f"unknown generator {generator!r}")
    if generator.startswith("hybrid-"):
        return hybrid_matrix(d, N, seed, H=H, mode=generator.split("-", 1)[1])
    bases = tuple(bases[:d]) if bases else tuple(odd_primes(d))
    if len(bases) != d:
        raise ValueError(f"need {d} bases, got {len(bases)}")
    if generator == "halton":
        ps = halton_stream(bases, N)
        ps.provenance.update(kind="halton", bases=list(bases))
        return ps
    return randomized_halton(bases, N, seed, H=H)


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    rows: list[dict] = field(default_factory=list)

    @property
    def aggregate(self) -> dict:
        judged = [r for r in self.rows if r["pass"] is not None]
        cells: dict[tuple, dict] = {}
        for r in self.rows:
            key = (r["d"], r["N"], r["measurement"])
            c = cells.setdefault(key, {"d": r["d"], "N": r["N"], "measurement": r["measurement"],
                                       "runs": 0, "passed": 0, "skipped": 0, "max_normalized": None})
            c["runs"] += 1
            c["passed"] += r["pass"] is True
            c["skipped"] += r["status"] != "ok"
            if r["normalized"] is not None:
                c["max_normalized"] = max(c["max_normalized"] or 0.0, r["normalized"])
        norms = [r["normalized"] for r in self.rows if r["normalized"] is not None]
        return {
            "rows": len(self.rows),
            "judged": len(judged),
            "passed": sum(r["pass"] is True for r in judged),
            "pass_fraction": (sum(r["pass"] is True for r in judged) / len(judged)) if judged else None,
            "skipped": sum(r["status"] != "ok" for r in self.rows),
            "max_normalized": max(norms) if norms else None,
            "cells": list(cells.values()),
        }

    @property
    def all_passed(self) -> bool:
        return all(r["pass"] is not False for r in self.rows)


def _bound_for(spec: ExperimentSpec, kind: str) -> str | None:
    for name in spec.bounds:
        if kind in BOUNDS[name]:
            return name
    return None


def _measure(spec: ExperimentSpec, P: PointSet, seed: int, d: int, N: int, m: Measurement) -> dict:
    t0 = time.perf_counter()
    row = dict.fromkeys(ROW_FIELDS)
    row.update(seed=seed, d=d, N=N, generator=spec.generator, measurement=str(m), status="ok")
    bound_name = _bound_for(spec, m.kind)
    row["bound_name"] = bound_name

    if m.kind == "subseq":
        worst_value, verdict, bound_used = None, True, None
        for gamma in range(1 << m.arg):
            sub = subsequence(P, m.arg, gamma)
            if sub.N == 0:
                continue
            if grid_work(sub) > spec.budget:
                row["status"] = "skipped(budget)"
                break
            value = star_discrepancy_exact(sub, budget=spec.budget).value
            worst_value = value if worst_value is None else max(worst_value, value)
            if bound_name == "halton_subseq":
                b = halton_subseq_bound(d, N, sub.N) if N >= 2 else math.inf
            elif bound_name == "subsequence_sqrt":
                b = subsequence_sqrt_bound(d, sub.N) if d >= 2 else math.inf
            else:
                b = None
            if b is not None:
                verdict &= value <= b
                bound_used = b if bound_used is None else min(bound_used, b)
        row["method"] = "exact"
        if row["status"] == "ok":
            row["value"] = float(worst_value) if worst_value is not None else None
            row["bound"] = bound_used
            row["pass"] = bool(verdict) if bound_used is not None else None
    else:
        method = m.kind
        if m.kind == "auto":
            method = "exact" if grid_work(P) <= spec.budget else "interval"
        row["method"] = method if method == "exact" else f"interval({m.arg})"
        if method == "exact" and grid_work(P) > spec.budget:
            row["status"] = "skipped(budget)"
        elif method == "exact":
            v = star_discrepancy_exact(P, budget=spec.budget).value
            row["value"] = row["lo"] = row["hi"] = float(v)
        else:
            iv = cover_discrepancy_interval(P, m.arg)
            row["lo"], row["hi"] = float(iv.lo), float(iv.hi)
            # the certified upper end stands in for D*
            row["value"] = row["hi"]
        if row["status"] == "ok":
            row["normalized"] = math.sqrt(N / d) * row["value"]
            if bound_name == "hybrid_matrix":
                row["bound"] = hybrid_matrix_bound(d, N, spec.epsilon)
                row["pass"] = row["value"] <= row["bound"]
    row["wall_time"] = round(time.perf_counter() - t0, 6)
    return row


def _run_cell(spec: ExperimentSpec, seed: int, d: int, N: int) -> list[dict]:
    P = make_points(spec.generator, d, N, seed, spec.bases, spec.H)
    return [_measure(spec, P, seed, d, N, m) for m in spec.measurements]


def run_experiment(spec: ExperimentSpec, workers: int = 1, write: bool = True) -> ExperimentReport:
    """Run every (seed, d, N) cell; rows come out in spec order whatever
    ``workers`` is.  Writes ``<output>.csv`` and ``<output>.json`` when the
    spec names an output and ``write`` is true."""
    cells = [(s, d, N) for s in spec.seeds for d in spec.d for N in spec.N]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda c: _run_cell(spec, *c), cells))
    else:
        chunks = [_run_cell(spec, *c) for c in cells]
    report = ExperimentReport(spec, [r for chunk in chunks for r in chunk])
    if write and spec.output:
        base = Path(spec.output)
        base.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{base}.csv").write_bytes(emit_report(report, "csv"))
        Path(f"{base}.json").write_bytes(emit_report(report, "json"))
    return report


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def emit_report(report: ExperimentReport, fmt: str = "json") -> bytes:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in report.rows:
            w.writerow([_csv_value(r[k]) for k in ROW_FIELDS])
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {
            "schema": SCHEMA,
            "spec": report.spec.to_text(),
            "rows": [{k: r[k] for k in ROW_FIELDS} for r in report.rows],
            "aggregate": report.aggregate,
        }
        return (json.dumps(doc, indent=1) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")
