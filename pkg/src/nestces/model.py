"""Three-input nested CES production function.

Output is modelled as

    V = A * [d * S**(rho/rho1) + (1 - d) * (K/L)**(-rho)] ** (-1/rho)
    S = d1 * K**(-rho1) + (1 - d1) * L**(-rho1)

i.e. an outer CES over the inner capital-labor aggregate X = S**(-1/rho1)
and the capital intensity K/L.  All powers are evaluated as exponentials
of logs; ``expm1``/``log1p`` keep the small-rho regime accurate, and
below ``EPSILON_RHO`` the Cobb-Douglas limit of the affected nest is used.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, NonPositiveAggregate

EPSILON_RHO = 1e-8

PARAM_NAMES = ("A", "delta", "delta1", "rho", "rho1")


@dataclass(frozen=True)
class Observation:
    output: float
    capital: float
    labor: float

    def __post_init__(self):
        for name in ("output", "capital", "labor"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class CesParams:
    """Parameters of the nested CES function.

    ``share_delta`` and ``share_delta1`` are deliberately not confined to
    [0, 1]; admissibility is checked per data point at evaluation time.
    """

    efficiency_A: float
    share_delta: float
    share_delta1: float
    rho: float
    rho1: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.efficiency_A, self.share_delta, self.share_delta1, self.rho, self.rho1],
            dtype=float,
        )

    @classmethod
    def from_array(cls, values) -> "CesParams":
        a, d, d1, r, r1 = (float(v) for v in values)
        return cls(a, d, d1, r, r1)

    def replace(self, **changes) -> "CesParams":
        values = dict(zip(PARAM_NAMES, self.as_array()))
        for key, value in changes.items():
            if key not in values:
                raise KeyError(key)
            values[key] = value
        return CesParams.from_array([values[k] for k in PARAM_NAMES])


class Intensity(str, enum.Enum):
    PurelyCapitalIntensive = "PurelyCapitalIntensive"
    LaborIntensive = "LaborIntensive"


@dataclass(frozen=True)
class IntensityClass:
    label: Intensity
    tolerance_used: float


class _Terms(NamedTuple):
    ln_g: np.ndarray  # ln(V / A)
    ln_x: np.ndarray  # ln of the inner capital-labor aggregate
    ln_r: np.ndarray  # ln(K/L)
    e: np.ndarray  # (L/K)**(-rho1) - 1
    u: np.ndarray  # S * K**rho1 = 1 + (1 - d1) * e
    f: np.ndarray  # (R/X)**(-rho) - 1
    w: np.ndarray  # B * X**rho = 1 + (1 - d) * f


def _log_inputs(capital, labor):
    k = np.asarray(capital, dtype=float)
    l = np.asarray(labor, dtype=float)
    if np.any(~(k > 0)) or np.any(~(l > 0)):
        raise DomainError("capital and labor must be > 0")
    return np.log(k), np.log(l)


def _first_bad(mask) -> int | None:
    idx = np.flatnonzero(np.ravel(mask))
    return int(idx[0]) if idx.size else None


def _terms(params: CesParams, ln_k, ln_l) -> _Terms:
    # Each nest is factored around its first input, e.g.
    #   S = K**-rho1 * (1 + (1 - d1) * ((L/K)**-rho1 - 1)),
    # so d = d1 = 1 reduces to V = A*K without rounding from the L terms.
    A, d, d1, rho, rho1 = params.as_array()
    if not A > 0:
        raise DomainError(f"efficiency_A must be > 0, got {A!r}")
    ln_k = np.asarray(ln_k, dtype=float)
    ln_l = np.asarray(ln_l, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.expm1(-rho1 * (ln_l - ln_k))
        u = 1.0 + (1.0 - d1) * e
        if abs(rho1) >= EPSILON_RHO:
            bad = ~(u > 0.0)
            if np.any(bad):
                raise NonPositiveAggregate(
                    "inner capital-labor aggregate is not positive", _first_bad(bad)
                )
            ln_x = ln_k - np.log1p((1.0 - d1) * e) / rho1
        else:
            ln_x = d1 * ln_k + (1.0 - d1) * ln_l
        ln_r = ln_k - ln_l
        f = np.expm1(-rho * (ln_r - ln_x))
        w = 1.0 + (1.0 - d) * f
        if abs(rho) >= EPSILON_RHO:
            bad = ~(w > 0.0)
            if np.any(bad):
                raise NonPositiveAggregate("outer aggregate is not positive", _first_bad(bad))
            ln_g = ln_x - np.log1p((1.0 - d) * f) / rho
        else:
            ln_g = d * ln_x + (1.0 - d) * ln_r
    return _Terms(ln_g, ln_x, ln_r, e, u, f, w)


def _scalar_or_array(values, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(values)
    return values


def log_output(params: CesParams, ln_capital, ln_labor) -> np.ndarray:
    """ln V for inputs given on the log scale."""
    return math.log(params.efficiency_A) + _terms(params, ln_capital, ln_labor).ln_g


def level_output(params: CesParams, ln_capital, ln_labor) -> np.ndarray:
    """V for inputs given on the log scale; identical to :func:`eval_ces`."""
    return params.efficiency_A * np.exp(_terms(params, ln_capital, ln_labor).ln_g)


def log_output_gradient(params: CesParams, ln_capital, ln_labor):
    """Return (ln V, d lnV / d theta) with theta = (A, delta, delta1, rho, rho1).

    Columns for rho or rho1 are NaN when that parameter lies inside the
    Cobb-Douglas limit band; callers substitute finite differences there.
    """
    A, d, d1, rho, rho1 = params.as_array()
    ln_k = np.asarray(ln_capital, dtype=float)
    ln_l = np.asarray(ln_labor, dtype=float)
    t = _terms(params, ln_k, ln_l)
    ln_lk = ln_l - ln_k
    z = t.ln_r - t.ln_x
    dg_dlnx = d / t.w

    grad = np.empty(t.ln_g.shape + (5,))
    grad[..., 0] = 1.0 / A
    if abs(rho) >= EPSILON_RHO:
        grad[..., 1] = t.f / (rho * t.w)
        grad[..., 3] = np.log1p((1.0 - d) * t.f) / rho**2 + (1.0 - d) * (1.0 + t.f) * z / (rho * t.w)
    else:
        grad[..., 1] = -z
        grad[..., 3] = np.nan
    if abs(rho1) >= EPSILON_RHO:
        dlnx_dd1 = t.e / (rho1 * t.u)
        dlnx_drho1 = np.log1p((1.0 - d1) * t.e) / rho1**2 + (1.0 - d1) * (1.0 + t.e) * ln_lk / (
            rho1 * t.u
        )
        grad[..., 4] = dg_dlnx * dlnx_drho1
    else:
        dlnx_dd1 = -ln_lk
        grad[..., 4] = np.nan
    grad[..., 2] = dg_dlnx * dlnx_dd1
    return math.log(A) + t.ln_g, grad


def eval_ces(params: CesParams, capital, labor):
    """Evaluate the nested CES output at (capital, labor); arrays broadcast."""
    ln_k, ln_l = _log_inputs(capital, labor)
    return _scalar_or_array(level_output(params, ln_k, ln_l), capital, labor)


def eval_plain_ces3(params: CesParams, capital, labor):
    """Flat three-input CES obtained by setting rho1 = rho.

    Uses ``params.rho`` for every term; the caller is responsible for
    ``params.rho1 == params.rho``.
    """
    A, d, d1, rho, _ = params.as_array()
    if not A > 0:
        raise DomainError(f"efficiency_A must be > 0, got {A!r}")
    ln_k, ln_l = _log_inputs(capital, labor)
    with np.errstate(over="ignore", invalid="ignore"):
        total = (
            d * d1 * np.exp(-rho * ln_k)
            + d * (1.0 - d1) * np.exp(-rho * ln_l)
            + (1.0 - d) * np.exp(-rho * (ln_k - ln_l))
        )
    bad = ~(total > 0)
    if np.any(bad):
        raise NonPositiveAggregate("flat CES aggregate is not positive", _first_bad(bad))
    return _scalar_or_array(A * np.exp(-np.log(total) / rho), capital, labor)


def eval_cobb_douglas_limit(params: CesParams, capital, labor):
    """Joint rho = rho1 -> 0 limit: A * K**(d*d1 + 1 - d) * L**(d*(1-d1) - (1-d))."""
    A, d, d1, _, _ = params.as_array()
    ln_k, ln_l = _log_inputs(capital, labor)
    k_exp = d * d1 + 1.0 - d
    l_exp = d * (1.0 - d1) - (1.0 - d)
    return _scalar_or_array(np.exp(math.log(A) + k_exp * ln_k + l_exp * ln_l), capital, labor)


def marginal_products(params: CesParams, capital, labor):
    """Analytic (dV/dK, dV/dL), with K/L differentiated through both inputs."""
    d, d1 = params.share_delta, params.share_delta1
    ln_k, ln_l = _log_inputs(capital, labor)
    t = _terms(params, ln_k, ln_l)
    v = params.efficiency_A * np.exp(t.ln_g)
    dg_dlnx = d / t.w
    dg_dlnr = (1.0 - d) * (1.0 + t.f) / t.w
    elast_k = dg_dlnx * d1 / t.u + dg_dlnr
    elast_l = dg_dlnx * (1.0 - d1) * (1.0 + t.e) / t.u - dg_dlnr
    mpk = v * elast_k / np.asarray(capital, dtype=float)
    mpl = v * elast_l / np.asarray(labor, dtype=float)
    return _scalar_or_array(mpk, capital, labor), _scalar_or_array(mpl, capital, labor)


def classify_intensity(params: CesParams, tolerance: float) -> IntensityClass:
    if not tolerance > 0:
        raise ValueError("tolerance must be > 0")
    capital_heavy = (
        abs(params.share_delta - 1.0) <= tolerance and abs(params.share_delta1 - 1.0) <= tolerance
    )
    label = Intensity.PurelyCapitalIntensive if capital_heavy else Intensity.LaborIntensive
    return IntensityClass(label, tolerance)


def sigma_from_rho(rho: float) -> float:
    """Elasticity of substitution 1/(1+rho); +inf at rho = -1."""
    if rho == -1.0:
        return math.inf
    return 1.0 / (1.0 + rho)


def concavity_probe(params: CesParams, capitals, labors, rel_step: float = 1e-4):
    """Finite-difference check of d2V/dK2 <= 0 and d2V/dL2 <= 0 on a grid.

    Returns a list of ``(K, L, d2V/dK2, d2V/dL2)`` for grid points where
    either second derivative is positive.  Points where the function is
    not admissible are skipped.
    """
    violations = []
    for k in np.ravel(capitals):
        for l in np.ravel(labors):
            hk, hl = rel_step * k, rel_step * l
            try:
                v0 = eval_ces(params, k, l)
                d2k = (eval_ces(params, k + hk, l) - 2 * v0 + eval_ces(params, k - hk, l)) / hk**2
                d2l = (eval_ces(params, k, l + hl) - 2 * v0 + eval_ces(params, k, l - hl)) / hl**2
            except NonPositiveAggregate:
                continue
            # tolerance for FD rounding noise relative to the curvature scale
            noise = 1e-6 * abs(v0) / min(k, l) ** 2
            if d2k > noise or d2l > noise:
                violations.append((float(k), float(l), float(d2k), float(d2l)))
    return violations
