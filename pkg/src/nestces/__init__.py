"""Nested CES production function estimation by grid search and Levenberg-Marquardt."""

from .data import Dataset, GroupBy, SynthSpec, Tags, aggregate_output, dump_csv, generate, load_csv
from .errors import *  # noqa: F401,F403
from .gridfit import (
    PRESETS,
    GridFitResult,
    RhoGrid,
    SigmaSource,
    SsrSurface,
    SurfaceFormat,
    expand_grid,
    export_surface,
    grid_search,
    parse_surface,
)
from .lm import LmOptions, LmOutcome, LmStatus, lm_fit
from .model import (
    CesParams,
    Intensity,
    IntensityClass,
    Observation,
    classify_intensity,
    eval_ces,
    eval_cobb_douglas_limit,
    eval_plain_ces3,
    marginal_products,
    sigma_from_rho,
)
from .objective import FreeMask, Scale, jacobian, residuals, rss
from .report import FitStats, ReportMeta, compute_stats, render_report, render_reports

__version__ = "0.1.0"
