"""Resampling schemes over normalized weights.

Both schemes draw n ancestor indices with replication counts whose
expectation is n * w_j; zero-weight particles are never drawn.
"""

import numpy as np

SCHEMES = ("multinomial", "systematic")


def multinomial_indices(weights, gen):
    counts = gen.multinomial(len(weights), weights)
    return np.repeat(np.arange(len(weights)), counts)


def systematic_indices(weights, gen):
    n = len(weights)
    points = (gen.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0  # guard the tail against rounding
    return np.searchsorted(cum, points)


def resample_indices(weights, scheme, gen):
    if scheme == "multinomial":
        return multinomial_indices(weights, gen)
    if scheme == "systematic":
        return systematic_indices(weights, gen)
    raise ValueError(f"unknown resampling scheme {scheme!r}")
