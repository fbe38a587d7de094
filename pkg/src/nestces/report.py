"""Fit statistics and Table-1 style reports (text, CSV, JSON)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData
from .lm import LmOutcome, LmStatus
from .model import Intensity, IntensityClass, classify_intensity, sigma_from_rho
from .objective import Scale, data_arrays

CSV_FIELDS = (
    "industry", "rho_set", "r2", "std_error", "sigma_outer", "sigma_inner",
    "delta", "delta1", "A", "rss", "convergence", "intensity",
)


@dataclass(frozen=True)
class FitStats:
    r_squared: float
    std_error: float
    rss: float
    sigma_outer: float
    sigma_inner: float
    delta: float
    delta1: float
    efficiency_A: float
    convergence: str
    intensity: IntensityClass


@dataclass(frozen=True)
class ReportMeta:
    industry_code: str = ""
    rho_set_label: str = ""


def convergence_label(status: LmStatus) -> str:
    return "Achieved" if LmStatus(status).converged else "Not achieved"


def compute_stats(data, outcome: LmOutcome, scale: Scale, n: int, p: int, tolerance: float) -> FitStats:
    """R^2 and residual standard error in the fitting scale, plus derived labels."""
    if not n > p >= 1:
        raise ValueError(f"need n > p >= 1, got n={n}, p={p}")
    output = data_arrays(data)[0]
    y = np.log(output) if Scale(scale) is Scale.Logs else output
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise DegenerateData("output is constant; R^2 undefined")
    params = outcome.params
    return FitStats(
        r_squared=1.0 - outcome.rss / tss,
        std_error=math.sqrt(outcome.rss / (n - p)),
        rss=outcome.rss,
        sigma_outer=sigma_from_rho(params.rho),
        sigma_inner=sigma_from_rho(params.rho1),
        delta=params.share_delta,
        delta1=params.share_delta1,
        efficiency_A=params.efficiency_A,
        convergence=convergence_label(outcome.status),
        intensity=classify_intensity(params, tolerance),
    )


def _record(stats: FitStats, meta: ReportMeta) -> dict:
    return {
        "industry": meta.industry_code,
        "rho_set": meta.rho_set_label,
        "r2": stats.r_squared,
        "std_error": stats.std_error,
        "sigma_outer": stats.sigma_outer,
        "sigma_inner": stats.sigma_inner,
        "delta": stats.delta,
        "delta1": stats.delta1,
        "A": stats.efficiency_A,
        "rss": stats.rss,
        "convergence": stats.convergence,
        "intensity": stats.intensity.label.value,
    }


def _sigma_text(sigma: float) -> str:
    if not math.isfinite(sigma):
        return "inf"
    # annotation only, mirrors the "1.4 ~ 1" style of the published table
    return f"{sigma:.2f} ≈ {round(sigma)}"


_TEXT_HEADER = (
    "Rho_set", "R2", "StdError", "Sigma", "delta", "delta1", "RSS",
    "Convergence", "Sigma_inner", "Intensity",
)


def _text(entries) -> str:
    rows = []
    for stats, meta in entries:
        rows.append((meta.industry_code, (
            meta.rho_set_label,
            f"{stats.r_squared:.2f}",
            f"{stats.std_error:.2f}",
            _sigma_text(stats.sigma_outer),
            f"{stats.delta:.2f}",
            f"{stats.delta1:.2f}",
            f"{stats.rss:.2f}",
            stats.convergence,
            _sigma_text(stats.sigma_inner),
            stats.intensity.label.value,
        )))
    widths = [len(h) for h in _TEXT_HEADER]
    for _, cells in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, cells)]

    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(_TEXT_HEADER)]
    current = None
    for industry, cells in rows:
        if industry and industry != current:
            out.append(f"Industry Code: {industry}")
            current = industry
        out.append(line(cells))
    return "\n".join(out) + "\n"


def render_reports(entries, fmt: str = "text") -> str:
    """Render a sequence of ``(FitStats, ReportMeta)`` pairs."""
    entries = list(entries)
    if fmt == "text":
        return _text(entries)
    records = [_record(s, m) for s, m in entries]
    if fmt == "json":
        for rec, (stats, _) in zip(records, entries):
            rec["intensity_tolerance"] = stats.intensity.tolerance_used
        return json.dumps(records, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for rec in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in rec.values()])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def render_report(stats: FitStats, meta: ReportMeta, fmt: str = "text") -> str:
    return render_reports([(stats, meta)], fmt)


def parse_report_json(text: str) -> list:
    """Inverse of the JSON rendering: list of ``(FitStats, ReportMeta)``."""
    result = []
    for rec in json.loads(text):
        stats = FitStats(
            r_squared=rec["r2"],
            std_error=rec["std_error"],
            rss=rec["rss"],
            sigma_outer=rec["sigma_outer"],
            sigma_inner=rec["sigma_inner"],
            delta=rec["delta"],
            delta1=rec["delta1"],
            efficiency_A=rec["A"],
            convergence=rec["convergence"],
            intensity=IntensityClass(Intensity(rec["intensity"]), rec["intensity_tolerance"]),
        )
        result.append((stats, ReportMeta(rec["industry"], rec["rho_set"])))
    return result
