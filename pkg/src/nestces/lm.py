"""Levenberg-Marquardt least squares with Marquardt's diagonal scaling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DomainError, InadmissibleStart, NonPositiveAggregate
from .model import CesParams
from .objective import FreeMask, Problem, Scale, sum_of_squares


class LmStatus(str, enum.Enum):
    ConvergedRss = "ConvergedRss"
    ConvergedGradient = "ConvergedGradient"
    ConvergedStep = "ConvergedStep"
    MaxIterations = "MaxIterations"
    DampingOverflow = "DampingOverflow"
    InadmissibleStart = "InadmissibleStart"

    @property
    def converged(self) -> bool:
        return self in (LmStatus.ConvergedRss, LmStatus.ConvergedGradient, LmStatus.ConvergedStep)


@dataclass(frozen=True)
class LmOptions:
    max_iterations: int = 200
    lambda_init: float = 1e-3
    lambda_factor: float = 10.0
    rss_rel_tol: float = 1e-10
    grad_tol: float = 1e-8
    step_tol: float = 1e-12
    lambda_max: float = 1e12

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not self.lambda_factor > 1:
            raise ValueError("lambda_factor must be > 1")
        for name in ("lambda_init", "rss_rel_tol", "grad_tol", "step_tol", "lambda_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class LmOutcome:
    params: CesParams
    rss: float
    iterations: int
    status: LmStatus
    # RSS at the start point followed by the RSS of every accepted step
    rss_trace: tuple


def lm_step(J: np.ndarray, r: np.ndarray, lam: float):
    """Solve (J'J + lam * diag(J'J)) s = J'r; None if the system is singular."""
    jtj = J.T @ J
    system = jtj + lam * np.diag(np.diag(jtj))
    try:
        factor = cho_factor(system, lower=True, check_finite=True)
    except (LinAlgError, ValueError):
        return None
    step = cho_solve(factor, J.T @ r)
    if not np.all(np.isfinite(step)):
        return None
    return step


def _try_residuals(problem: Problem, params: CesParams):
    try:
        r = problem.residuals(params)
    except (NonPositiveAggregate, DomainError):
        return None
    if not np.all(np.isfinite(r)):
        return None
    return r


def lm_fit(
    data,
    init: CesParams,
    mask: FreeMask,
    scale: Scale = Scale.Levels,
    options: LmOptions | None = None,
) -> LmOutcome:
    """Fit the free parameters in ``mask`` starting from ``init``.

    ``data`` may be a prebuilt :class:`Problem`, in which case ``scale`` is
    taken from it.  Every attempted step, accepted or rejected, counts as
    one iteration.
    """
    options = options or LmOptions()
    problem = data if isinstance(data, Problem) else Problem(data, scale)
    cols = mask.indices

    theta = init.as_array()
    params = init
    r = _try_residuals(problem, params) if init.efficiency_A > 0 else None
    if r is None:
        raise InadmissibleStart("initial parameters are not admissible on the data")
    f = sum_of_squares(r)
    trace = [f]
    lam = options.lambda_init
    iterations = 0
    J = problem.jacobian(params, cols)

    while True:
        grad = J.T @ r
        if not np.all(np.isfinite(grad)):
            status = LmStatus.DampingOverflow
            break
        if np.max(np.abs(grad)) < options.grad_tol:
            status = LmStatus.ConvergedGradient
            break
        if iterations >= options.max_iterations:
            status = LmStatus.MaxIterations
            break
        if lam > options.lambda_max:
            status = LmStatus.DampingOverflow
            break
        iterations += 1

        step = lm_step(J, r, lam)
        if step is None:
            lam *= options.lambda_factor
            continue
        scale_theta = np.max(np.abs(theta[cols]))
        if np.max(np.abs(step)) <= options.step_tol * (scale_theta + options.step_tol):
            status = LmStatus.ConvergedStep
            break

        candidate = theta.copy()
        candidate[cols] += step
        r_new = None
        if candidate[0] > 0:
            cand_params = CesParams.from_array(candidate)
            r_new = _try_residuals(problem, cand_params)
        f_new = sum_of_squares(r_new) if r_new is not None else math.inf
        if not f_new < f:
            lam *= options.lambda_factor
            continue

        rel_change = (f - f_new) / f
        theta, params, r, f = candidate, cand_params, r_new, f_new
        trace.append(f)
        lam /= options.lambda_factor
        if f == 0.0 or rel_change < options.rss_rel_tol:
            status = LmStatus.ConvergedRss
            break
        J = problem.jacobian(params, cols)

    return LmOutcome(params, f, iterations, status, tuple(trace))
