"""Stationary AR(1) series with exact values revealed at random times.

State: x_t = phi * x_{t-1} + eps_t with eps_t ~ N(0, sigma2) and the chain
started from its stationary law N(0, sigma2 / (1 - phi^2)).  Each coordinate
of the history, once it exists, becomes known with probability theta at every
step, independently of the state values, so revelation cancels from all
weight ratios (missing at random).
"""

import math
from dataclasses import dataclass

import numpy as np

from .engine import Model
from .rng import substream

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Ar1Params:
    phi: float
    sigma2: float
    theta: float

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ValueError(f"phi must satisfy |phi| < 1, got {self.phi}")
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")

    @property
    def stationary_variance(self):
        return self.sigma2 / (1.0 - self.phi**2)


def geom_sum(phi, k):
    """Sum of phi^(2j) for j = 0 .. k-1; the k-step innovation variance is
    sigma2 times this."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if phi == 0.0:
        return 0.0 if k == 0 else 1.0
    return (1.0 - phi ** (2 * k)) / (1.0 - phi**2)


def _normal_logpdf(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var)) - (x - mean) ** 2 / (2.0 * var)


def stationary_logpdf(params, x):
    return _normal_logpdf(x, 0.0, params.stationary_variance)


def transition_logpdf(params, prev, cur):
    return _normal_logpdf(cur, params.phi * prev, params.sigma2)


def kstep_logpdf(params, start, end, k):
    """Log density of the k-step transition from start to end."""
    mean = params.phi**k * start
    var = params.sigma2 * geom_sum(params.phi, k)
    return _normal_logpdf(end, mean, var)


def partial_weight_log(params, original, corrected, i):
    """Closed-form log weight factor at index i for one corrected series.

    Both arguments are full value vectors (time-major).  At i = 1 the factor
    is the stationary density ratio; at i >= 2 it is the transition density
    ratio.  Normalizing constants cancel, leaving pure quadratic forms.
    """
    x, y = np.asarray(original, float).ravel(), np.asarray(corrected, float).ravel()
    if i == 1:
        return float(-(1.0 - params.phi**2) / (2.0 * params.sigma2)
                     * (y[0] ** 2 - x[0] ** 2))
    d_new = (y[i - 1] - params.phi * y[i - 2]) ** 2
    d_old = (x[i - 1] - params.phi * x[i - 2]) ** 2
    return float(-(d_new - d_old) / (2.0 * params.sigma2))


def _runs(newly_times):
    """Maximal blocks of consecutive time indices."""
    runs = []
    for i in sorted(newly_times):
        if runs and i == runs[-1][1] + 1:
            runs[-1][1] = i
        else:
            runs.append([i, i])
    return runs


def u2_log_normalizer(params, corrected, newly_times):
    """Log mass of the prior restricted to histories matching the correction.

    Factors untouched by the correction cancel against the corrected
    history's own density, so the mass reduces to one closed-form Gaussian
    marginal per replaced block: integrating a block out of the product of
    transitions leaves the multi-step transition density bridging the block's
    pinned neighbours (the stationary density when the block starts the
    series, and nothing at all when it ends at the horizon, where the free
    factors integrate to one).
    """
    x = np.asarray(corrected, float).ravel()
    t = x.size
    total = 0.0
    for a, b in _runs(newly_times):
        if not 1 <= a <= b <= t:
            raise ValueError(f"replaced block [{a},{b}] outside history of length {t}")
        if b == t:
            continue
        if a == 1:
            total += float(stationary_logpdf(params, x[b]))
        else:
            total += float(kstep_logpdf(params, x[a - 2], x[b], b - a + 2))
    return total


def u2_normalizer(params, corrected, newly_times):
    return math.exp(u2_log_normalizer(params, corrected, newly_times))


class Ar1Model(Model):
    """Engine adapter; rows are (n, 1) slices of the series."""

    n_coords = 1
    state_dtype = np.float64
    missing_at_random = True
    supports_u2 = True

    def __init__(self, params, u1_bound=None):
        self.params = params
        if u1_bound is None:
            u1_bound = 8.0 * math.sqrt(params.stationary_variance)
        if not u1_bound > 0.0:
            raise ValueError("u1 bound must be positive")
        self.u1_bound = float(u1_bound)

    def initial_sample(self, gen, n):
        sd = math.sqrt(self.params.stationary_variance)
        return gen.normal(0.0, sd, size=(n, 1))

    def initial_logpdf(self, rows):
        return stationary_logpdf(self.params, rows[:, 0])

    def transition_sample(self, gen, prev):
        eps = gen.normal(0.0, math.sqrt(self.params.sigma2), size=(prev.shape[0], 1))
        return self.params.phi * prev + eps

    def transition_logpdf(self, prev, cur):
        return transition_logpdf(self.params, prev[:, 0], cur[:, 0])

    def u1_log_indicator(self, replaced_values):
        inside = np.all(np.abs(replaced_values) <= self.u1_bound, axis=1)
        return np.where(inside, 0.0, -np.inf)

    def u2_log_normalizer(self, corrected, newly_times):
        x = corrected[:, :, 0]
        t = x.shape[1]
        total = np.zeros(x.shape[0])
        for a, b in _runs(newly_times):
            if b == t:
                continue
            if a == 1:
                total += stationary_logpdf(self.params, x[:, b])
            else:
                total += kstep_logpdf(self.params, x[:, a - 2], x[:, b], b - a + 2)
        return total


def simulate_truth(params, steps, seed):
    """Draw one series and its revelation schedule.

    Returns (values, reveal_step), both (steps, 1); reveal_step is 0 for
    coordinates never revealed within the horizon.  Coordinate i is eligible
    for revelation from its own step onward and flips with probability theta
    per step.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    gen = substream(seed, "truth_state", 0)
    eps = gen.normal(size=steps)
    x = np.empty(steps)
    x[0] = math.sqrt(params.stationary_variance) * eps[0]
    sd = math.sqrt(params.sigma2)
    for i in range(1, steps):
        x[i] = params.phi * x[i - 1] + sd * eps[i]

    gen_rev = substream(seed, "truth_reveal", 0)
    u = gen_rev.random((steps, steps))
    eligible = np.tril(np.ones((steps, steps), dtype=bool))  # step t row, coord i col
    hit = (u < params.theta) & eligible
    reveal = np.zeros(steps, dtype=np.int64)
    for i in range(steps):
        col = hit[:, i]
        if col.any():
            reveal[i] = int(np.argmax(col)) + 1
    return x[:, None], reveal[:, None]
