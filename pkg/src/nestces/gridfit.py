"""Grid search over the substitution parameters with per-cell LM fits.

Each (rho1, rho) cell holds both substitution parameters fixed and fits
(A, delta, delta1).  Cells are visited rho1-major, rho ascending.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AllCellsFailed, EmptyGrid, InadmissibleStart, NonPositiveAggregate
from .lm import LmOptions, LmOutcome, LmStatus, lm_fit
from .model import CesParams, log_output, sigma_from_rho
from .objective import FreeMask, Problem, Scale

LATTICE_TOL = 1e-9
DEDUP_TOL = 1e-12
SHARE_MASK = FreeMask(A=True, delta=True, delta1=True, rho=False, rho1=False)


@dataclass(frozen=True)
class RhoGrid:
    """Candidate values as (start, stop, step) segments."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(tuple(float(x) for x in seg) for seg in self.segments)
        for seg in segs:
            if len(seg) != 3:
                raise ValueError(f"segment {seg} must be (start, stop, step)")
            start, stop, step = seg
            if not step > 0:
                raise ValueError(f"segment {seg}: step must be > 0")
            if not start <= stop:
                raise ValueError(f"segment {seg}: start must be <= stop")
        object.__setattr__(self, "segments", segs)

    def __add__(self, other: "RhoGrid") -> "RhoGrid":
        return RhoGrid(self.segments + other.segments)

    @classmethod
    def parse(cls, text: str) -> "RhoGrid":
        """Parse one ``start:stop:step`` triple."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected start:stop:step, got {text!r}")
        return cls((tuple(float(p) for p in parts),))


# The two preselected grids, kept as raw triples so other readings of the
# notation can be swapped in.
PRESETS = {
    "rhoVec1": RhoGrid(((-0.9, 1.25, 0.64), (1.68, 1.72, 0.88), (1.86, 10.00, 0.94))),
    "rhoVec2": RhoGrid(((-1.0, 1.0, 0.40), (1.68, 2.00, 0.64), (10.00, 11.51, 0.88))),
}


def _expand_segment(start: float, stop: float, step: float) -> list:
    values = []
    k = 0
    while True:
        value = start + k * step
        if value > stop + LATTICE_TOL:
            break
        if abs(value - stop) <= LATTICE_TOL:
            value = stop
        # strip accumulated binary noise from the lattice arithmetic
        values.append(round(value, 12))
        k += 1
    return values


def expand_grid(grid: RhoGrid) -> list:
    """Sorted, deduplicated union of all segment lattices."""
    values = sorted(v for seg in grid.segments for v in _expand_segment(*seg))
    merged = []
    for v in values:
        if not merged or v - merged[-1] > DEDUP_TOL:
            merged.append(v)
    if not merged:
        raise EmptyGrid("grid expands to no values")
    return merged


class SigmaSource(str, enum.Enum):
    Outer = "outer"
    Inner = "inner"


@dataclass(frozen=True)
class SsrSurface:
    rho1_values: tuple
    rho_values: tuple
    neg_ssr: np.ndarray  # shape (len(rho1_values), len(rho_values)); NaN = missing
    status: tuple  # status label per cell
    outcomes: tuple | None = None  # LmOutcome or None per cell

    def cells(self):
        for i, r1 in enumerate(self.rho1_values):
            for j, r in enumerate(self.rho_values):
                yield i, j, r1, r


@dataclass(frozen=True)
class GridCell:
    rho1: float
    rho: float
    outcome: LmOutcome


@dataclass(frozen=True)
class GridFitResult:
    best_unconstrained: GridCell
    best_reasonable: GridCell | None
    surface: SsrSurface


def default_init(problem: Problem, rho: float, rho1: float) -> CesParams:
    """(A, 0.5, 0.5) with A matching mean output to the unit-A mean prediction."""
    base = CesParams(1.0, 0.5, 0.5, rho, rho1)
    g = np.exp(log_output(base, problem.ln_k, problem.ln_l))
    return base.replace(A=float(np.mean(problem.output) / np.mean(g)))


def fit_cell(problem: Problem, rho: float, rho1: float, options: LmOptions, init: CesParams | None = None):
    """LM fit of (A, delta, delta1) at fixed (rho, rho1).

    Tries ``init`` first (if given) and falls back to the default start.
    Returns None when no start is admissible.
    """
    starts = [] if init is None else [init]
    try:
        starts.append(default_init(problem, rho, rho1))
    except NonPositiveAggregate:
        pass
    for start in starts:
        try:
            return lm_fit(problem, start, SHARE_MASK, options=options)
        except InadmissibleStart:
            continue
    return None


def _cold_cell(args):
    problem, rho, rho1, options = args
    return fit_cell(problem, rho, rho1, options)


def _warm_neighbour(grid_outcomes, i, j, rho, rho1):
    """Start from the lowest-RSS already-visited neighbour, if any."""
    best = None
    for di, dj in ((-1, -1), (-1, 0), (-1, 1), (0, -1)):
        ii, jj = i + di, j + dj
        if ii < 0 or jj < 0 or jj >= len(grid_outcomes[0]):
            continue
        out = grid_outcomes[ii][jj]
        if out is not None and (best is None or out.rss < best.rss):
            best = out
    if best is None:
        return None
    return best.params.replace(rho=rho, rho1=rho1)


def _select(cells):
    """Minimum RSS; ties go to smaller rho, then smaller rho1."""
    if not cells:
        return None
    return min(cells, key=lambda c: (c.outcome.rss, c.rho, c.rho1))


def sigma_in_unit_interval(cell: GridCell, source: SigmaSource) -> bool:
    rho = cell.rho if SigmaSource(source) is SigmaSource.Outer else cell.rho1
    return 0.0 <= sigma_from_rho(rho) <= 1.0


def select_best(cells, sigma_source: SigmaSource = SigmaSource.Outer):
    """(best_unconstrained, best_reasonable) over completed GridCells."""
    cells = list(cells)
    reasonable = [c for c in cells if sigma_in_unit_interval(c, sigma_source)]
    return _select(cells), _select(reasonable)


def grid_search(
    data,
    rho_grid: RhoGrid,
    rho1_grid: RhoGrid,
    scale: Scale = Scale.Levels,
    lm_options: LmOptions | None = None,
    sigma_source: SigmaSource = SigmaSource.Outer,
    warm_start: bool = True,
    workers: int | None = None,
) -> GridFitResult:
    """Fit every (rho1, rho) cell and pick the best overall and best with sigma in [0, 1].

    ``warm_start`` seeds each cell from its best already-visited neighbour;
    it needs the sequential visiting order, so it cannot be combined with
    ``workers > 1``.
    """
    options = lm_options or LmOptions()
    rhos = expand_grid(rho_grid)
    rho1s = expand_grid(rho1_grid)
    problem = Problem(data, scale)
    if problem.n < SHARE_MASK.n_free + 1:
        raise ValueError(f"need at least {SHARE_MASK.n_free + 1} observations, got {problem.n}")
    parallel = workers is not None and workers > 1
    if parallel and warm_start:
        raise ValueError("warm_start requires sequential execution")

    outcomes = [[None] * len(rhos) for _ in rho1s]
    if parallel:
        jobs = [(problem, r, r1, options) for r1 in rho1s for r in rhos]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_cold_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        for k, out in enumerate(flat):
            outcomes[k // len(rhos)][k % len(rhos)] = out
    else:
        for i, r1 in enumerate(rho1s):
            for j, r in enumerate(rhos):
                init = _warm_neighbour(outcomes, i, j, r, r1) if warm_start else None
                outcomes[i][j] = fit_cell(problem, r, r1, options, init)

    neg = np.full((len(rho1s), len(rhos)), np.nan)
    status = []
    cells = []
    for i, r1 in enumerate(rho1s):
        row = []
        for j, r in enumerate(rhos):
            out = outcomes[i][j]
            if out is None:
                row.append(LmStatus.InadmissibleStart.value)
                continue
            neg[i, j] = -out.rss
            row.append(out.status.value)
            cells.append(GridCell(r1, r, out))
        status.append(tuple(row))
    if not cells:
        raise AllCellsFailed("no grid cell produced an admissible fit")

    surface = SsrSurface(
        tuple(rho1s), tuple(rhos), neg, tuple(status), tuple(tuple(row) for row in outcomes)
    )
    best, reasonable = select_best(cells, sigma_source)
    return GridFitResult(best, reasonable, surface)


class SurfaceFormat(str, enum.Enum):
    LongCsv = "long"
    Matrix = "matrix"


def _num(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def export_surface(surface: SsrSurface, fmt: SurfaceFormat = SurfaceFormat.LongCsv) -> str:
    """Serialize a surface; floats use shortest round-trip repr, ``\\n`` line ends."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if SurfaceFormat(fmt) is SurfaceFormat.LongCsv:
        writer.writerow(["rho1", "rho", "neg_ssr", "status"])
        for i, j, r1, r in surface.cells():
            writer.writerow([repr(float(r1)), repr(float(r)), _num(surface.neg_ssr[i, j]), surface.status[i][j]])
    else:
        writer.writerow(["rho1\\rho"] + [repr(float(r)) for r in surface.rho_values])
        for i, r1 in enumerate(surface.rho1_values):
            writer.writerow([repr(float(r1))] + [_num(v) for v in surface.neg_ssr[i]])
    return buf.getvalue()


def parse_surface(text: str) -> SsrSurface:
    """Inverse of ``export_surface`` for the long CSV format (fits not restored)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["rho1", "rho", "neg_ssr", "status"]:
        raise ValueError("not a long-format surface CSV")
    body = [r for r in rows[1:] if r]
    rho1s = sorted({float(r[0]) for r in body})
    rhos = sorted({float(r[1]) for r in body})
    neg = np.full((len(rho1s), len(rhos)), np.nan)
    status = [[""] * len(rhos) for _ in rho1s]
    for r1, r, v, st in body:
        i, j = rho1s.index(float(r1)), rhos.index(float(r))
        neg[i, j] = float(v) if v else np.nan
        status[i][j] = st
    return SsrSurface(tuple(rho1s), tuple(rhos), neg, tuple(tuple(s) for s in status))
