import math
from pathlib import Path

import mpmath as mp
import numpy as np
import pytest

from nestces.data import SynthSpec, generate, read_csv
from nestces.lm import lm_fit
from nestces.model import CesParams, eval_ces
from nestces.objective import FreeMask, Scale

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_CSV = DATA_DIR / "golden_seed7.csv"
TRUTH = CesParams(2.0, 0.6, 0.4, 0.5, 1.2)


def mp_output(theta, K, L, dps=40):
    """Nested CES written directly from its definition in extended precision."""
    with mp.workdps(dps):
        A, d, d1, r, r1 = (mp.mpf(x) for x in theta)
        K, L = mp.mpf(K), mp.mpf(L)
        inner = d1 * K ** (-r1) + (1 - d1) * L ** (-r1)
        return A * (d * inner ** (r / r1) + (1 - d) * (K / L) ** (-r)) ** (-1 / r)


def mp_central_diff(f, x, h="1e-15", dps=40):
    """Central difference evaluated in extended precision."""
    with mp.workdps(dps):
        x, h = mp.mpf(x), mp.mpf(h)
        return (f(x + h) - f(x - h)) / (2 * h)


def mp_param_derivative(theta, K, L, j):
    def f(x):
        t = list(theta)
        t[j] = x
        return mp_output(t, K, L)

    return float(mp_central_diff(f, theta[j]))


def close(a, b, rel, abs_floor=1e-10):
    """Relative comparison, absolute where the reference is tiny."""
    if abs(b) < abs_floor:
        return abs(a - b) <= abs_floor
    return abs(a - b) <= rel * abs(b)


def random_params(rng, rho_low=-0.8, rho_high=3.0, min_abs_rho=0.05):
    def pick():
        while True:
            r = rng.uniform(rho_low, rho_high)
            if abs(r) > min_abs_rho:
                return r

    return CesParams(rng.uniform(0.5, 3.0), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), pick(), pick())


def log_grid(n=5, low=0.1, high=100.0):
    return np.exp(np.linspace(math.log(low), math.log(high), n))


def brute_force(data, rhos, rho1s, scale=Scale.Levels, sigma_source="outer"):
    """Fit every cell from the default start, independently and in order.

    Returns a dict (rho1, rho) -> outcome and the two selected keys.
    """
    V = np.array([o.output for o in data])
    K = np.array([o.capital for o in data])
    L = np.array([o.labor for o in data])
    fits = {}
    for r1 in rho1s:
        for r in rhos:
            g = eval_ces(CesParams(1.0, 0.5, 0.5, r, r1), K, L)
            init = CesParams(float(V.mean() / g.mean()), 0.5, 0.5, r, r1)
            fits[(r1, r)] = lm_fit(data, init, FreeMask(), scale)

    def pick(keys):
        keys = list(keys)
        if not keys:
            return None
        return min(keys, key=lambda k: (fits[k].rss, k[1], k[0]))

    def reasonable(k):
        rho = k[1] if sigma_source == "outer" else k[0]
        return rho >= 0  # 1/(1+rho) in [0, 1]

    return fits, pick(fits), pick(k for k in fits if reasonable(k))


@pytest.fixture(scope="session")
def golden():
    return read_csv(GOLDEN_CSV)


@pytest.fixture(scope="session")
def golden_spec():
    return SynthSpec(TRUTH, 200, (0.5, 50.0), (0.5, 50.0), 0.0, 7)


@pytest.fixture(scope="session")
def noisy7():
    return generate(SynthSpec(TRUTH, 200, (0.5, 50.0), (0.5, 50.0), 0.01, 7))


def pytest_terminal_summary(terminalreporter):
    results = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
