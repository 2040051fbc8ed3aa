"""Deterministic random streams.

Every random draw in the package comes from a counter-based Philox stream
keyed by (seed, domain, step).  Vector draws are indexed by particle slot, so
slot j of a draw always belongs to particle j.  Any single draw can therefore
be reproduced in isolation and execution order never changes results.
"""

import numpy as np

# Stable domain codes. Never renumber: emitted results depend on them.
DOMAINS = {
    "init": 1,
    "transition": 2,
    "observation": 3,
    "resample": 4,
    "truth_state": 5,
    "truth_reveal": 6,
    "truth_probe": 7,
}

MAX_SEED = 2**64 - 1


def substream(seed, domain, step):
    """Return a fresh Generator for one (seed, domain, step) cell.

    The Philox counter starts at (0, 0, 0, step); consuming a draw advances
    the low counter word, so neighbouring cells cannot collide.
    """
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    try:
        code = DOMAINS[domain]
    except KeyError:
        raise ValueError(f"unknown stream domain {domain!r}") from None
    key = np.array([int(seed), code], dtype=np.uint64)
    counter = np.array([0, 0, 0, int(step)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
