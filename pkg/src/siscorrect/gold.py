"""Exact conditional posteriors for the AR(1) series.

Because revelation is independent of the values, the conditional law of a
missing coordinate given every revealed value is Gaussian and depends only on
the nearest revealed neighbours.  With S_k = sum of phi^(2j) for j < k:

* between two revealed values x_tau (earlier) and x_m (later), the value at
  tau < i < m is Normal with
      mean = (phi^(m-i) * S_(i-tau) * x_m + phi^(i-tau) * S_(m-i) * x_tau) / S_(m-tau)
      var  = sigma2 * S_(m-i) * S_(i-tau) / S_(m-tau)
* after the last revealed value (i > tau) it is the i-tau step prediction
  Normal(phi^(i-tau) * x_tau, sigma2 * S_(i-tau));
* before the first revealed value the stationary chain is time-reversible
  with the same coefficient, so the same prediction form applies backwards;
* with nothing revealed at all it is the stationary law.

These serve as the gold standard the particle output is judged against.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .ar1 import geom_sum


@dataclass(frozen=True)
class GaussianPosterior:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def sd(self):
        return math.sqrt(self.variance)


def bridge_posterior(params, tau, m, i, x_tau, x_m):
    """Conditional law of the value at i strictly between revealed tau and m."""
    if not tau < i < m:
        raise ValueError(f"need tau < i < m, got tau={tau}, i={i}, m={m}")
    phi, s2 = params.phi, params.sigma2
    s_left = geom_sum(phi, i - tau)
    s_right = geom_sum(phi, m - i)
    s_span = geom_sum(phi, m - tau)
    mean = (phi ** (m - i) * s_left * x_m + phi ** (i - tau) * s_right * x_tau) / s_span
    var = s2 * s_right * s_left / s_span
    return GaussianPosterior(mean, var)


def tail_posterior(params, tau, i, x_tau):
    """Conditional law of the value at i given a single revealed neighbour.

    Works on either side of tau: forward prediction for i > tau, and the
    time-reversed prediction (same coefficient, by stationarity) for i < tau.
    """
    k = abs(i - tau)
    if k == 0:
        raise ValueError("i must differ from the revealed index")
    mean = params.phi**k * x_tau
    var = params.sigma2 * geom_sum(params.phi, k)
    return GaussianPosterior(mean, var)


def prior_posterior(params):
    """Stationary law, used when nothing at all is revealed."""
    return GaussianPosterior(0.0, params.stationary_variance)


def oracle_for_coordinate(params, values, known, i):
    """(kind, GaussianPosterior) for coordinate i given revealed flanks.

    values/known describe the final observation state of the series
    (time-major, single coordinate).  kind is one of "bridge", "leading",
    "trailing", "prior"; raises if coordinate i is itself revealed.
    """
    known = np.asarray(known, dtype=bool).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if known[i - 1]:
        raise ValueError(f"coordinate {i} is revealed; no oracle needed")
    obs = np.flatnonzero(known) + 1
    before = obs[obs < i]
    after = obs[obs > i]
    if before.size and after.size:
        tau, m = int(before[-1]), int(after[0])
        return "bridge", bridge_posterior(params, tau, m, i,
                                          values[tau - 1], values[m - 1])
    if before.size:
        tau = int(before[-1])
        return "trailing", tail_posterior(params, tau, i, values[tau - 1])
    if after.size:
        m = int(after[0])
        return "leading", tail_posterior(params, m, i, values[m - 1])
    return "prior", prior_posterior(params)


def weighted_ks_distance(values, weights, oracle):
    """Sup distance between the weighted ECDF and the oracle CDF."""
    values = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    w = w / w.sum()
    order = np.argsort(values, kind="stable")
    v = values[order]
    cum = np.cumsum(w[order])
    cdf = norm.cdf(v, loc=oracle.mean, scale=oracle.sd)
    below = np.concatenate([[0.0], cum[:-1]])
    return float(np.max(np.maximum(np.abs(cum - cdf), np.abs(below - cdf))))


def compare_to_oracle(values, weights, oracle):
    """KS distance plus absolute mean and variance errors of the weighted sample."""
    values = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    w = w / w.sum()
    mean = float(np.dot(w, values))
    var = float(np.dot(w, (values - mean) ** 2))
    return {
        "ks_distance": weighted_ks_distance(values, w, oracle),
        "mean_error": abs(mean - oracle.mean),
        "var_error": abs(var - oracle.variance),
    }
