"""Command-line front end: fit, grid, simulate, aggregate.

Exit codes: 0 success, 1 usage or input error, 2 fit completed without
converging.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .data import GroupBy, NoiseKind, SynthSpec, aggregate_output, dump_csv, format_groups, generate, read_csv
from .errors import NestCesError
from .gridfit import PRESETS, RhoGrid, SigmaSource, SurfaceFormat, export_surface, grid_search
from .lm import LmOptions, lm_fit
from .model import PARAM_NAMES, CesParams, log_output
from .objective import FreeMask, Problem, Scale
from .report import ReportMeta, compute_stats, render_report

DEFAULT_TOLERANCE = 0.2
START_DEFAULTS = {"delta": 0.5, "delta1": 0.5, "rho": 0.5, "rho1": 0.5}
PRESET_LABELS = {"rhoVec1": "rhoVec_1", "rhoVec2": "rhoVec_2"}


class UsageError(Exception):
    pass


def _preset_help() -> str:
    lines = ["presets (start:stop:step segments):"]
    for name, grid in PRESETS.items():
        segs = ", ".join(":".join(f"{x:g}" for x in seg) for seg in grid.segments)
        lines.append(f"  {name}: {segs}")
    return "\n".join(lines)


def _assignment(text: str):
    name, sep, value = text.partition("=")
    name = name.strip()
    if not sep or name not in PARAM_NAMES:
        raise argparse.ArgumentTypeError(
            f"expected NAME=VALUE with NAME in {', '.join(PARAM_NAMES)}, got {text!r}"
        )
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number in {text!r}") from None


def _triple(text: str) -> RhoGrid:
    try:
        return RhoGrid.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    # only show defaults that carry information
    def _get_help_string(self, action):
        if action.default in (None, False, "") or action.required:
            return action.help
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    # argparse's default exit status 2 would read as "unconverged"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_lm_options(p):
    d = LmOptions()
    g = p.add_argument_group("solver")
    g.add_argument("--max-iterations", type=int, default=d.max_iterations, help="iteration cap, rejected steps included")
    g.add_argument("--lambda-init", type=float, default=d.lambda_init, help="initial damping")
    g.add_argument("--lambda-factor", type=float, default=d.lambda_factor, help="damping multiplier on reject, divisor on accept")
    g.add_argument("--rss-rel-tol", type=float, default=d.rss_rel_tol, help="stop when the relative RSS change falls below this")
    g.add_argument("--grad-tol", type=float, default=d.grad_tol, help="stop when the largest gradient entry falls below this")
    g.add_argument("--step-tol", type=float, default=d.step_tol, help="stop when the relative step falls below this")
    g.add_argument("--lambda-max", type=float, default=d.lambda_max, help="give up once damping exceeds this")


def _add_report_options(p):
    p.add_argument("--input", required=True, help="CSV with output,capital,labor columns")
    p.add_argument("--scale", choices=[s.value for s in Scale], default=Scale.Levels.value,
                   help="residual scale")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text", help="report format")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                   help="capital-intensity classification tolerance on |delta-1|, |delta1-1|")
    p.add_argument("--industry", default="", help="industry code shown in the report")
    _add_lm_options(p)


def _lm_options(args) -> LmOptions:
    return LmOptions(
        max_iterations=args.max_iterations,
        lambda_init=args.lambda_init,
        lambda_factor=args.lambda_factor,
        rss_rel_tol=args.rss_rel_tol,
        grad_tol=args.grad_tol,
        step_tol=args.step_tol,
        lambda_max=args.lambda_max,
    )


def _load(path):
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    return read_csv(path)


def _emit_report(data, outcome, args, p, label):
    stats = compute_stats(data, outcome, Scale(args.scale), len(data), p, args.tolerance)
    sys.stdout.write(render_report(stats, ReportMeta(args.industry, label), args.format))
    return 0 if outcome.status.converged else 2


def cmd_fit(args) -> int:
    data = _load(args.input)
    fixed = dict(args.fix or [])
    try:
        mask = FreeMask.fixing(fixed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if mask.n_free > len(data) - 1:
        raise UsageError(f"{mask.n_free} free parameters need at least {mask.n_free + 1} observations")
    start = dict(START_DEFAULTS)
    start.update(dict(args.init or []))
    start.update(fixed)
    if "A" not in start:
        base = CesParams(1.0, start["delta"], start["delta1"], start["rho"], start["rho1"])
        prob = Problem(data, Scale.Levels)
        g = np.exp(log_output(base, prob.ln_k, prob.ln_l))
        start["A"] = float(np.mean(prob.output) / np.mean(g))
    init = CesParams.from_array([start[name] for name in PARAM_NAMES])
    outcome = lm_fit(data, init, mask, Scale(args.scale), _lm_options(args))
    return _emit_report(data, outcome, args, mask.n_free, args.rho_set)


def _axis(explicit, presets):
    grid = None
    for name in presets:
        grid = PRESETS[name] if grid is None else grid + PRESETS[name]
    for extra in explicit or []:
        grid = extra if grid is None else grid + extra
    return grid


def cmd_grid(args) -> int:
    data = _load(args.input)
    presets = list(args.preset or [])
    if not presets and not args.rho and not args.rho1:
        presets = ["rhoVec1"]
    rho_grid = _axis(args.rho, presets) or _axis(None, ["rhoVec1"])
    rho1_grid = _axis(args.rho1, presets) or _axis(None, ["rhoVec1"])
    label = args.rho_set or "+".join(PRESET_LABELS[p] for p in presets) or "custom"

    parallel = args.parallel
    workers = (args.workers or os.cpu_count() or 1) if parallel else None
    result = grid_search(
        data,
        rho_grid,
        rho1_grid,
        Scale(args.scale),
        _lm_options(args),
        SigmaSource(args.sigma_source),
        warm_start=not (parallel or args.no_warm_start),
        workers=workers,
    )
    if args.surface:
        with open(args.surface, "w", encoding="utf-8", newline="") as fh:
            fh.write(export_surface(result.surface, SurfaceFormat(args.surface_format)))

    chosen, which = result.best_reasonable, "best_reasonable"
    if chosen is None:
        print("warning: no cell has sigma in [0, 1]; reporting the unconstrained best cell",
              file=sys.stderr)
        chosen, which = result.best_unconstrained, "best_unconstrained"
    print(f"selected cell ({which}): rho1={chosen.rho1!r} rho={chosen.rho!r}", file=sys.stderr)
    return _emit_report(data, chosen.outcome, args, 3, label)


def cmd_simulate(args) -> int:
    params = CesParams(args.A, args.delta, args.delta1, args.rho, args.rho1)
    spec = SynthSpec(
        params, args.n, tuple(args.k_range), tuple(args.l_range), args.noise, args.seed,
        NoiseKind(args.noise_kind),
    )
    text = dump_csv(generate(spec))
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.write_spec:
        with open(args.write_spec, "w", encoding="utf-8", newline="") as fh:
            fh.write(spec.to_json() + "\n")
    return 0


def cmd_aggregate(args) -> int:
    data = _load(args.input)
    by = GroupBy(args.by)
    sys.stdout.write(format_groups(aggregate_output(data, by), by, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nestces",
        description="Estimate a three-input nested CES production function.",
        formatter_class=_Formatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="single LM fit", formatter_class=_Formatter,
                       description="Fit the free parameters with Levenberg-Marquardt. "
                       "Unlisted starting values: delta=0.5, delta1=0.5, rho=0.5, rho1=0.5, "
                       "A matched to mean output.")
    _add_report_options(p)
    p.add_argument("--fix", type=_assignment, action="append", metavar="NAME=VALUE",
                   help="hold a parameter fixed (repeatable)")
    p.add_argument("--init", type=_assignment, action="append", metavar="NAME=VALUE",
                   help="starting value for a free parameter (repeatable)")
    p.add_argument("--rho-set", default="", help="label for the report's Rho_set column")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("grid", help="grid search over (rho1, rho)", formatter_class=_Formatter,
                       description="Fit (A, delta, delta1) at every (rho1, rho) grid cell.\n"
                       "With no --preset/--rho/--rho1 the rhoVec1 preset is used for both axes.\n"
                       "--rho/--rho1 triples are added to any --preset segments.\n"
                       "Write negative starts as --rho=-0.5:1:0.5.\n\n"
                       + _preset_help())
    _add_report_options(p)
    p.add_argument("--preset", action="append", choices=sorted(PRESETS),
                   help="add a preset grid to both axes (repeatable)")
    p.add_argument("--rho", type=_triple, action="append", metavar="START:STOP:STEP",
                   help="outer substitution grid segment (repeatable)")
    p.add_argument("--rho1", type=_triple, action="append", metavar="START:STOP:STEP",
                   help="inner substitution grid segment (repeatable)")
    p.add_argument("--sigma-source", choices=[s.value for s in SigmaSource],
                   default=SigmaSource.Outer.value,
                   help="which rho defines sigma for the [0, 1] selection rule")
    p.add_argument("--surface", metavar="PATH", help="write the negative-SSR surface here")
    p.add_argument("--surface-format", choices=[f.value for f in SurfaceFormat],
                   default=SurfaceFormat.LongCsv.value, help="long rows or a rho1-by-rho matrix")
    p.add_argument("--parallel", action="store_true",
                   help="fit cells in worker processes; disables neighbour warm-starting, "
                   "so output equals a sequential --no-warm-start run")
    p.add_argument("--workers", type=int, default=None, help="worker count for --parallel; CPU count when omitted")
    p.add_argument("--no-warm-start", action="store_true",
                   help="start every cell from the default initial values")
    p.add_argument("--rho-set", default="", help="label for the report's Rho_set column; preset names when omitted")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("simulate", help="generate a synthetic dataset", formatter_class=_Formatter,
                       description="Draw K, L log-uniformly (numpy PCG64) and V from the model. "
                       "The defaults reproduce the seed-7 reference fixture.")
    p.add_argument("--n", type=int, default=200, help="number of observations")
    p.add_argument("--seed", type=int, default=7, help="generator seed")
    p.add_argument("--A", type=float, default=2.0, help="true efficiency")
    p.add_argument("--delta", type=float, default=0.6, help="true outer share")
    p.add_argument("--delta1", type=float, default=0.4, help="true inner share")
    p.add_argument("--rho", type=float, default=0.5, help="true outer substitution parameter")
    p.add_argument("--rho1", type=float, default=1.2, help="true inner substitution parameter")
    p.add_argument("--k-range", type=float, nargs=2, default=[0.5, 50.0], metavar=("LOW", "HIGH"),
                   help="capital draw range")
    p.add_argument("--l-range", type=float, nargs=2, default=[0.5, 50.0], metavar=("LOW", "HIGH"),
                   help="labor draw range")
    p.add_argument("--noise", type=float, default=0.0, help="noise standard deviation")
    p.add_argument("--noise-kind", choices=[k.value for k in NoiseKind], default=NoiseKind.LogNormal.value, help="lognormal multiplies V by exp(eps), additive adds eps")
    p.add_argument("--output", metavar="PATH", help="write CSV here instead of stdout")
    p.add_argument("--write-spec", metavar="PATH", help="also write the generator settings as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("aggregate", help="total output per group", formatter_class=_Formatter)
    p.add_argument("--input", required=True, help="CSV with state and/or industry columns")
    p.add_argument("--by", choices=[g.value for g in GroupBy], default=GroupBy.State.value, help="grouping key")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text", help="output format")
    p.set_defaults(func=cmd_aggregate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NestCesError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
