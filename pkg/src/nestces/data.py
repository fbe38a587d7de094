"""CSV ingestion, seeded synthetic data and group-by totals.

Synthetic draws use numpy's ``PCG64`` bit generator through
``numpy.random.Generator``; the draw order (all log-capital, then all
log-labor, then all noise) is part of the fixture contract and must not
change.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BadRow,
    DomainError,
    EmptyDataset,
    InadmissibleParams,
    MissingColumn,
    MissingTag,
    NonPositiveAggregate,
)
from .model import CesParams, Observation, _log_inputs, log_output

REQUIRED_COLUMNS = ("output", "capital", "labor")
TAG_COLUMNS = ("industry", "state", "year")


@dataclass(frozen=True)
class Tags:
    industry_code: str | None = None
    state: str | None = None
    year: int | None = None


@dataclass(frozen=True)
class Dataset:
    observations: tuple
    tags: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        if not self.observations:
            raise EmptyDataset("dataset has no observations")
        if self.tags is not None:
            object.__setattr__(self, "tags", tuple(self.tags))
            if len(self.tags) != len(self.observations):
                raise ValueError("tags must have one entry per observation")

    def __len__(self):
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    @cached_property
    def _arrays(self):
        out = np.array([o.output for o in self.observations], dtype=float)
        cap = np.array([o.capital for o in self.observations], dtype=float)
        lab = np.array([o.labor for o in self.observations], dtype=float)
        for a in (out, cap, lab):
            a.flags.writeable = False
        return out, cap, lab

    def arrays(self):
        return self._arrays


def _parse_positive(raw: str, name: str, row: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise BadRow(row, f"{name} must be numeric") from None
    if not math.isfinite(value):
        raise BadRow(row, f"{name} must be finite")
    if value <= 0:
        raise BadRow(row, f"{name} must be > 0")
    return value


def load_csv(document: str) -> Dataset:
    """Parse comma-separated text with an ``output,capital,labor`` header.

    Optional ``industry``, ``state`` and ``year`` columns populate the
    per-row tags.  Data rows are numbered from 1.
    """
    reader = csv.reader(io.StringIO(document))
    header = next(reader, None)
    if header is None:
        raise MissingColumn("missing header row")
    header = [h.strip() for h in header]
    for name in REQUIRED_COLUMNS:
        if name not in header:
            raise MissingColumn(f"missing required column {name!r}")
    pos = {name: header.index(name) for name in header}
    tag_cols = [c for c in TAG_COLUMNS if c in pos]

    observations, tags = [], []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise BadRow(row_no, f"expected {len(header)} fields, got {len(row)}")
        vals = [_parse_positive(row[pos[name]].strip(), name, row_no) for name in REQUIRED_COLUMNS]
        observations.append(Observation(*vals))
        if tag_cols:
            year = None
            if "year" in pos and row[pos["year"]].strip():
                try:
                    year = int(row[pos["year"]])
                except ValueError:
                    raise BadRow(row_no, "year must be an integer") from None
            tags.append(
                Tags(
                    industry_code=(row[pos["industry"]].strip() or None) if "industry" in pos else None,
                    state=(row[pos["state"]].strip() or None) if "state" in pos else None,
                    year=year,
                )
            )
    if not observations:
        raise EmptyDataset("no data rows")
    return Dataset(tuple(observations), tuple(tags) if tag_cols else None)


def read_csv(path) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_csv(fh.read())


def dump_csv(dataset: Dataset) -> str:
    """Render a dataset as CSV text; floats use shortest round-trip repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    tag_cols = []
    if dataset.tags is not None:
        tag_cols = [
            col
            for col, attr in zip(TAG_COLUMNS, ("industry_code", "state", "year"))
            if any(getattr(t, attr) is not None for t in dataset.tags)
        ]
    writer.writerow(list(REQUIRED_COLUMNS) + tag_cols)
    for i, obs in enumerate(dataset.observations):
        row = [repr(obs.output), repr(obs.capital), repr(obs.labor)]
        if tag_cols:
            t = dataset.tags[i]
            lookup = {"industry": t.industry_code, "state": t.state, "year": t.year}
            row += ["" if lookup[c] is None else str(lookup[c]) for c in tag_cols]
        writer.writerow(row)
    return buf.getvalue()


class NoiseKind(str, enum.Enum):
    LogNormal = "lognormal"
    Additive = "additive"


@dataclass(frozen=True)
class SynthSpec:
    true_params: CesParams
    n: int
    k_range: tuple = (0.5, 50.0)
    l_range: tuple = (0.5, 50.0)
    noise_sigma: float = 0.0
    seed: int = 0
    noise: NoiseKind = NoiseKind.LogNormal

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        for name in ("k_range", "l_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi):
                raise ValueError(f"{name} must satisfy 0 < low < high")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_json(self) -> str:
        p = self.true_params
        return json.dumps(
            {
                "true_params": {
                    "A": p.efficiency_A,
                    "delta": p.share_delta,
                    "delta1": p.share_delta1,
                    "rho": p.rho,
                    "rho1": p.rho1,
                },
                "n": self.n,
                "k_range": list(self.k_range),
                "l_range": list(self.l_range),
                "noise_sigma": self.noise_sigma,
                "seed": self.seed,
                "noise": NoiseKind(self.noise).value,
                "generator": "numpy.random.PCG64",
            },
            indent=2,
        )


def generate(spec: SynthSpec) -> Dataset:
    """Draw K, L log-uniformly and V from the model with optional noise."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    ln_k = rng.uniform(math.log(spec.k_range[0]), math.log(spec.k_range[1]), spec.n)
    ln_l = rng.uniform(math.log(spec.l_range[0]), math.log(spec.l_range[1]), spec.n)
    eps = spec.noise_sigma * rng.standard_normal(spec.n)
    capital = np.exp(ln_k)
    labor = np.exp(ln_l)
    try:
        log_v = log_output(spec.true_params, *_log_inputs(capital, labor))
    except (NonPositiveAggregate, DomainError) as exc:
        raise InadmissibleParams(f"true parameters are not admissible: {exc}") from None
    if NoiseKind(spec.noise) is NoiseKind.LogNormal:
        output = np.exp(log_v + eps)
    else:
        output = np.exp(log_v) + eps
    if not np.all(output > 0) or not np.all(np.isfinite(output)):
        raise InadmissibleParams("generated output is not strictly positive and finite")
    obs = tuple(Observation(float(v), float(k), float(l)) for v, k, l in zip(output, capital, labor))
    return Dataset(obs)


class GroupBy(str, enum.Enum):
    State = "state"
    Industry = "industry"
    StateAndIndustry = "state-industry"


def aggregate_output(data: Dataset, by: GroupBy) -> list:
    """Total output per group, sorted by key.

    Keys are strings, or ``(state, industry)`` tuples for StateAndIndustry.
    """
    by = GroupBy(by)
    needed = {
        GroupBy.State: ("state",),
        GroupBy.Industry: ("industry_code",),
        GroupBy.StateAndIndustry: ("state", "industry_code"),
    }[by]
    if data.tags is None:
        raise MissingTag(f"dataset has no tags; grouping by {by.value} needs them")
    groups: dict = {}
    for i, (obs, tag) in enumerate(zip(data.observations, data.tags), start=1):
        key = tuple(getattr(tag, attr) for attr in needed)
        if any(k is None for k in key):
            raise MissingTag(f"row {i} lacks {'/'.join(needed)}")
        groups.setdefault(key if len(key) > 1 else key[0], []).append(obs.output)
    return [(key, math.fsum(values)) for key, values in sorted(groups.items())]


def format_groups(rows: list, by: GroupBy, fmt: str = "text") -> str:
    by = GroupBy(by)
    key_cols = ["state", "industry"] if by is GroupBy.StateAndIndustry else [
        "state" if by is GroupBy.State else "industry"
    ]
    flat = [(list(k) if isinstance(k, tuple) else [k], total) for k, total in rows]
    if fmt == "json":
        return json.dumps(
            [dict(zip(key_cols, k), total_output=t) for k, t in flat], indent=2
        ) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(key_cols + ["total_output"])
        for k, t in flat:
            w.writerow(k + [repr(t)])
        return buf.getvalue()
    widths = [max([len(c)] + [len(k[i]) for k, _ in flat]) for i, c in enumerate(key_cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(key_cols, widths)) + "  total_output"]
    for k, t in flat:
        lines.append("  ".join(v.ljust(w) for v, w in zip(k, widths)) + f"  {t:.2f}")
    return "\n".join(lines) + "\n"
