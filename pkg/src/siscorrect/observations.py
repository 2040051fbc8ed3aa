"""Observation feeds: exact values revealed progressively, never erased.

A feed stores, for a horizon of T steps and M coordinates per step, the value
of every coordinate together with the step at which that value becomes known
(0 when it never does).  The knowledge available at step t is the mask of
cells whose reveal step is at most t; because reveal steps are fixed, the
revealed set can only grow and revealed values never change.

Two file layouts share one header line ``T M``:

* ``M == 1`` (scalar series): line t carries the full knowledge vector at
  step t, i.e. t tokens, each a value or ``-``.  Revelation may touch any
  past coordinate, so every line repeats what is already known.
* ``M > 1`` (lattice presence data): line t carries the M tokens of row t
  only, each ``1`` or ``-``.  Knowledge about a row is complete at the row's
  own step and never changes afterwards, so one line per step suffices.
"""

import numpy as np

MISSING_TOKEN = "-"


class FeedFormatError(ValueError):
    """Raised when a feed file or feed construction violates the contract."""


def _fmt(x):
    return f"{float(x):.17g}"


class ObservationFeed:
    """Progressively revealed exact observations of a length-T, width-M system."""

    def __init__(self, values, reveal_step):
        values = np.asarray(values, dtype=float)
        reveal_step = np.asarray(reveal_step, dtype=np.int64)
        if values.ndim != 2 or values.shape != reveal_step.shape:
            raise FeedFormatError("values and reveal_step must be equal 2-D shapes")
        t, m = values.shape
        if t < 1 or m < 1:
            raise FeedFormatError("feed must cover at least one step and one coordinate")
        rows = np.arange(1, t + 1)[:, None]
        bad = (reveal_step != 0) & (reveal_step < rows)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise FeedFormatError(
                f"coordinate ({i + 1},{j + 1}) marked revealed at step "
                f"{reveal_step[i, j]}, before it exists"
            )
        if not np.isfinite(values[reveal_step != 0]).all():
            raise FeedFormatError("revealed values must be finite")
        self.values = values
        self.reveal_step = reveal_step

    @property
    def steps(self):
        return self.values.shape[0]

    @property
    def n_coords(self):
        return self.values.shape[1]

    def known_at(self, t):
        """Bool mask (t, M): cells whose values are known at step t."""
        r = self.reveal_step[:t]
        return (r != 0) & (r <= t)

    def known_row(self, i):
        """Bool mask (M,): knowledge about row i as of step i itself."""
        r = self.reveal_step[i - 1]
        return (r != 0) & (r <= i)

    def newly_known_at(self, t):
        """Bool mask (t, M): cells revealed at step t and not before."""
        return self.reveal_step[:t] == t

    def matrix_at(self, t):
        """(values, known) pair describing the observation matrix at step t."""
        return self.values[:t], self.known_at(t)

    def final_known(self):
        return self.known_at(self.steps)


def write_feed(path, feed, model_kind):
    lines = [f"{feed.steps} {feed.n_coords}"]
    if model_kind == "ar1":
        if feed.n_coords != 1:
            raise FeedFormatError("ar1 feeds are single-coordinate")
        for t in range(1, feed.steps + 1):
            known = feed.known_at(t)[:, 0]
            toks = [
                _fmt(feed.values[i, 0]) if known[i] else MISSING_TOKEN
                for i in range(t)
            ]
            lines.append(" ".join(toks))
    elif model_kind == "invasion":
        for t in range(1, feed.steps + 1):
            row = feed.known_row(t)
            lines.append(" ".join("1" if k else MISSING_TOKEN for k in row))
    else:
        raise FeedFormatError(f"unknown model kind {model_kind!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(line):
    parts = line.split()
    if len(parts) != 2:
        raise FeedFormatError(f"header must be 'T M', got {line!r}")
    try:
        t, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise FeedFormatError(f"header must hold two integers, got {line!r}") from None
    if t < 1 or m < 1:
        raise FeedFormatError(f"header dimensions must be positive, got {line!r}")
    return t, m


def validate_feed_file(path, model_kind):
    """Check a feed file; returns (violations, shape) without raising.

    Violations cover shape consistency, monotone revelation (a revealed value
    must stay revealed and keep its value), and presence-only consistency for
    lattice feeds (tokens are 1, detections accumulate, the detected set is
    one contiguous block seeded by a single origin cell).
    """
    if model_kind not in ("ar1", "invasion"):
        return ([f"unknown model kind {model_kind!r}"], None)
    with open(path) as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    raw = [ln for ln in raw if ln.strip() != ""]
    if not raw:
        return (["empty feed file"], None)
    try:
        t_total, m = _parse_header(raw[0])
    except FeedFormatError as exc:
        return ([str(exc)], None)
    violations = []
    body = raw[1:]
    if len(body) != t_total:
        violations.append(f"expected {t_total} data lines, found {len(body)}")
        return (violations, (t_total, m))

    if model_kind == "ar1":
        if m != 1:
            violations.append(f"ar1 feeds require M=1, header says M={m}")
            return (violations, (t_total, m))
        prev = []
        for t, line in enumerate(body, start=1):
            toks = line.split()
            if len(toks) != t:
                violations.append(f"line {t}: expected {t} tokens, found {len(toks)}")
                continue
            cur = []
            for i, tok in enumerate(toks, start=1):
                if tok == MISSING_TOKEN:
                    cur.append(None)
                    continue
                try:
                    cur.append(float(tok))
                except ValueError:
                    violations.append(f"line {t}: bad token {tok!r} at position {i}")
                    cur.append(None)
            for i, old in enumerate(prev, start=1):
                if old is None:
                    continue
                if cur[i - 1] is None:
                    violations.append(
                        f"line {t}: coordinate {i} was revealed earlier but is missing now"
                    )
                elif cur[i - 1] != old:
                    violations.append(
                        f"line {t}: coordinate {i} changed value from {old!r} to {cur[i - 1]!r}"
                    )
            prev = cur
    else:
        prev_mask = np.zeros(m, dtype=bool)
        for t, line in enumerate(body, start=1):
            toks = line.split()
            if len(toks) != m:
                violations.append(f"line {t}: expected {m} tokens, found {len(toks)}")
                continue
            mask = np.zeros(m, dtype=bool)
            for i, tok in enumerate(toks):
                if tok == "1":
                    mask[i] = True
                elif tok != MISSING_TOKEN:
                    violations.append(
                        f"line {t}: token {tok!r} at cell {i + 1}; lattice feeds are presence-only"
                    )
            if t == 1 and mask.sum() != 1:
                violations.append(
                    f"line 1: expected exactly one detected origin cell, found {int(mask.sum())}"
                )
            if (prev_mask & ~mask).any():
                violations.append(f"line {t}: previously detected cells disappeared")
            if mask.any():
                lo = int(np.argmax(mask))
                hi = m - 1 - int(np.argmax(mask[::-1]))
                if int(mask.sum()) != hi - lo + 1:
                    violations.append(f"line {t}: detected set is not contiguous")
            prev_mask = mask
    return (violations, (t_total, m))


def load_feed(path, model_kind):
    """Parse a feed file strictly; raises FeedFormatError on any violation."""
    violations, shape = validate_feed_file(path, model_kind)
    if violations:
        raise FeedFormatError(f"{path}: {violations[0]}")
    t_total, m = shape
    with open(path) as fh:
        raw = [ln for ln in (s.rstrip("\n") for s in fh) if ln.strip() != ""]
    body = raw[1:]
    values = np.zeros((t_total, m))
    reveal = np.zeros((t_total, m), dtype=np.int64)
    if model_kind == "ar1":
        for t, line in enumerate(body, start=1):
            toks = line.split()
            for i, tok in enumerate(toks):
                if tok == MISSING_TOKEN:
                    continue
                if reveal[i, 0] == 0:
                    reveal[i, 0] = t
                    values[i, 0] = float(tok)
    else:
        for t, line in enumerate(body, start=1):
            toks = line.split()
            for i, tok in enumerate(toks):
                if tok == "1":
                    values[t - 1, i] = 1.0
                    reveal[t - 1, i] = t
    return ObservationFeed(values, reveal)


def feed_from_truth(values, reveal_step):
    """Build a feed directly from simulated truth (values plus reveal steps)."""
    return ObservationFeed(values, reveal_step)
