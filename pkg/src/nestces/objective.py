"""Residuals, the sum-of-squares objective and its Jacobian."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import (
    EPSILON_RHO,
    PARAM_NAMES,
    CesParams,
    _log_inputs,
    level_output,
    log_output,
    log_output_gradient,
)

# central-difference step for the rho columns inside the Cobb-Douglas band
_RHO_FD_STEP = 1e-5


class Scale(str, enum.Enum):
    Levels = "levels"
    Logs = "logs"


@dataclass(frozen=True)
class FreeMask:
    """Which of (A, delta, delta1, rho, rho1) are estimated."""

    A: bool = True
    delta: bool = True
    delta1: bool = True
    rho: bool = False
    rho1: bool = False

    def __post_init__(self):
        if not any(self.flags):
            raise ValueError("no free parameters")

    @property
    def flags(self) -> tuple:
        return tuple(getattr(self, name) for name in PARAM_NAMES)

    @property
    def indices(self) -> list:
        return [i for i, flag in enumerate(self.flags) if flag]

    @property
    def n_free(self) -> int:
        return len(self.indices)

    @classmethod
    def fixing(cls, names) -> "FreeMask":
        names = set(names)
        unknown = names - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return cls(**{name: name not in names for name in PARAM_NAMES})


def data_arrays(data):
    """(output, capital, labor) float arrays from a Dataset or Observation sequence."""
    if hasattr(data, "arrays"):
        return data.arrays()
    obs = list(data)
    return (
        np.array([o.output for o in obs], dtype=float),
        np.array([o.capital for o in obs], dtype=float),
        np.array([o.labor for o in obs], dtype=float),
    )


class Problem:
    """Data pre-transformed for repeated objective evaluations."""

    def __init__(self, data, scale: Scale = Scale.Levels):
        self.scale = Scale(scale)
        output, capital, labor = data_arrays(data)
        self.output = output
        self.ln_k, self.ln_l = _log_inputs(capital, labor)
        self.y = np.log(output) if self.scale is Scale.Logs else output

    @property
    def n(self) -> int:
        return self.y.size

    def predict(self, params: CesParams) -> np.ndarray:
        if self.scale is Scale.Logs:
            return log_output(params, self.ln_k, self.ln_l)
        return level_output(params, self.ln_k, self.ln_l)

    def residuals(self, params: CesParams) -> np.ndarray:
        return self.y - self.predict(params)

    def jacobian(self, params: CesParams, columns) -> np.ndarray:
        _, grad = log_output_gradient(params, self.ln_k, self.ln_l)
        grad = grad[:, columns].copy()
        for j, col in enumerate(columns):
            if PARAM_NAMES[col] in ("rho", "rho1") and abs(params.as_array()[col]) < EPSILON_RHO:
                grad[:, j] = self._fd_log_column(params, col)
        if self.scale is Scale.Levels:
            grad *= level_output(params, self.ln_k, self.ln_l)[:, None]
        return grad

    def _fd_log_column(self, params: CesParams, col: int) -> np.ndarray:
        theta = params.as_array()
        up, down = theta.copy(), theta.copy()
        up[col] += _RHO_FD_STEP
        down[col] -= _RHO_FD_STEP
        hi = log_output(CesParams.from_array(up), self.ln_k, self.ln_l)
        lo = log_output(CesParams.from_array(down), self.ln_k, self.ln_l)
        return (hi - lo) / (2 * _RHO_FD_STEP)


def sum_of_squares(r: np.ndarray) -> float:
    # cumulative sum fixes a left-to-right summation order
    if r.size == 0:
        return 0.0
    return float(np.cumsum(r * r)[-1])


def residuals(params: CesParams, data, scale: Scale = Scale.Levels) -> np.ndarray:
    """Observed minus fitted output, in levels or logs, in input order."""
    return Problem(data, scale).residuals(params)


def rss(params: CesParams, data, scale: Scale = Scale.Levels) -> float:
    return sum_of_squares(residuals(params, data, scale))


def jacobian(params: CesParams, data, mask: FreeMask, scale: Scale = Scale.Levels) -> np.ndarray:
    """n x p matrix of d(prediction)/d(free parameter), columns in (A, delta, delta1, rho, rho1) order."""
    return Problem(data, scale).jacobian(params, mask.indices)
