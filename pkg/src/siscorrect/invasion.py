"""Contiguous lattice invasion observed through frontier probes.

The state at step t is a contiguous block of invaded cells containing the
origin.  Each step the block may grow by one cell per side, independently
with probability theta_exp, until a side hits its domain end (a finished side
contributes no factor).  Surveillance probes run every step from the last
detected cell outward: each invaded cell is detected with probability
phi_det, probing stops at the first miss or at the first non-invaded cell, so
detected cells always form a contiguous block inside the invaded one.  A
probe sequence that stops strictly short of the true front contributes one
miss factor (1 - phi_det); one that stops because it reached the front (or
the domain end) contributes none.  Detections are presence-only and exact,
and the origin is detected at step 1 by construction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .engine import Model
from .observations import FeedFormatError, ObservationFeed
from .rng import substream


def _log(p):
    return math.log(p) if p > 0.0 else -math.inf


@dataclass(frozen=True)
class InvasionParams:
    cells: int
    origin: int          # 1-based origin cell
    theta_exp: float     # per-side expansion probability
    phi_det: float       # per-cell detection probability
    max_time: int

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError(f"cells must be positive, got {self.cells}")
        if not 1 <= self.origin <= self.cells:
            raise ValueError(
                f"origin must lie in 1..{self.cells}, got {self.origin}")
        if not 0.0 <= self.theta_exp <= 1.0:
            raise ValueError(f"theta_exp must lie in [0, 1], got {self.theta_exp}")
        if not 0.0 <= self.phi_det <= 1.0:
            raise ValueError(f"phi_det must lie in [0, 1], got {self.phi_det}")
        if self.max_time < 1:
            raise ValueError(f"max_time must be positive, got {self.max_time}")


@dataclass(frozen=True)
class InvasionState:
    """One occupancy row with cached fronts (0-based inclusive columns)."""

    row: np.ndarray
    left: int
    right: int

    @staticmethod
    def from_row(row):
        row = np.asarray(row)
        if row.ndim != 1 or not row.any():
            raise ValueError("occupancy row must be 1-D with at least one cell set")
        left = int(np.argmax(row != 0))
        right = row.size - 1 - int(np.argmax(row[::-1] != 0))
        if int((row != 0).sum()) != right - left + 1:
            raise ValueError("occupied cells must form one contiguous block")
        return InvasionState(row.astype(np.int8), left, right)

    def grown_to(self, new_row):
        new = InvasionState.from_row(new_row)
        if new.left > self.left or new.right < self.right:
            raise ValueError("invaded cells can never be vacated")
        return new


@dataclass(frozen=True)
class DetectionFrontier:
    """Detected block bounds (0-based inclusive), pinned inside the invasion."""

    left: int
    right: int

    @staticmethod
    def from_known_row(known_row):
        known_row = np.asarray(known_row, dtype=bool)
        if not known_row.any():
            raise ValueError("detection frontier requires at least one detected cell")
        left = int(np.argmax(known_row))
        right = known_row.size - 1 - int(np.argmax(known_row[::-1]))
        if int(known_row.sum()) != right - left + 1:
            raise ValueError("detected cells must form one contiguous block")
        return DetectionFrontier(left, right)


def _row_fronts(rows):
    """Per-row (left, right, valid) for (n, M) 0/1 arrays; valid means the
    row is one nonempty contiguous block."""
    rows = np.asarray(rows)
    m = rows.shape[1]
    occupied = rows != 0
    nonempty = occupied.any(axis=1)
    left = np.argmax(occupied, axis=1)
    right = m - 1 - np.argmax(occupied[:, ::-1], axis=1)
    contiguous = occupied.sum(axis=1) == right - left + 1
    return left, right, nonempty & contiguous


def _interval_rows(left, right, m):
    cols = np.arange(m)
    return (cols >= left[:, None]) & (cols <= right[:, None])


class InvasionModel(Model):
    """Engine adapter; rows are (n, M) int8 occupancy vectors."""

    missing_at_random = False
    supports_u2 = False
    state_dtype = np.int8

    def __init__(self, params):
        self.params = params
        self.n_coords = params.cells
        self._mu = params.origin - 1
        self._log_th = _log(params.theta_exp)
        self._log_1mth = _log(1.0 - params.theta_exp)
        self._log_ph = _log(params.phi_det)
        self._log_1mph = _log(1.0 - params.phi_det)

    def initial_sample(self, gen, n):
        rows = np.zeros((n, self.n_coords), dtype=np.int8)
        rows[:, self._mu] = 1
        return rows

    def initial_logpdf(self, rows):
        target = np.zeros(self.n_coords, dtype=rows.dtype)
        target[self._mu] = 1
        ok = (np.asarray(rows) == target).all(axis=1)
        return np.where(ok, 0.0, -np.inf)

    def transition_sample(self, gen, prev):
        n, m = prev.shape
        left, right, valid = _row_fronts(prev)
        if not valid.all():
            raise ValueError("transition from a non-contiguous occupancy row")
        u = gen.random((n, 2))
        grow_l = (left > 0) & (u[:, 0] < self.params.theta_exp)
        grow_r = (right < m - 1) & (u[:, 1] < self.params.theta_exp)
        out = np.array(prev, dtype=np.int8, copy=True)
        rows_l = np.flatnonzero(grow_l)
        out[rows_l, left[rows_l] - 1] = 1
        rows_r = np.flatnonzero(grow_r)
        out[rows_r, right[rows_r] + 1] = 1
        return out

    def transition_logpdf(self, prev, cur):
        m = prev.shape[1]
        pl, pr, pv = _row_fronts(prev)
        cl, cr, cv = _row_fronts(cur)
        k_l = pl - cl
        k_r = cr - pr
        valid = pv & cv & (k_l >= 0) & (k_l <= 1) & (k_r >= 0) & (k_r <= 1)
        # a finished side contributes no factor and cannot move
        term_l = np.where(pl == 0, 0.0,
                          np.where(k_l == 1, self._log_th, self._log_1mth))
        term_r = np.where(pr == m - 1, 0.0,
                          np.where(k_r == 1, self._log_th, self._log_1mth))
        return np.where(valid, term_l + term_r, -np.inf)

    def observation_sample(self, gen, state_rows, known_prev_row):
        n, m = state_rows.shape
        if known_prev_row is None:
            # the origin is observed when the invasion is first noticed
            out = np.zeros((n, m), dtype=bool)
            out[:, self._mu] = True
            return out
        prev = DetectionFrontier.from_known_row(known_prev_row)
        left, right, valid = _row_fronts(state_rows)
        if not valid.all():
            raise ValueError("probing a non-contiguous occupancy row")
        gap_r = right - prev.right
        gap_l = prev.left - left
        u = gen.random((n, 2))
        adv_l = _truncated_run_lengths(u[:, 0], gap_l, self.params.phi_det)
        adv_r = _truncated_run_lengths(u[:, 1], gap_r, self.params.phi_det)
        return _interval_rows(prev.left - adv_l, prev.right + adv_r, m)

    def observation_logpdf(self, state_rows, known_prev_row, known_rows):
        n, m = state_rows.shape
        known_rows = np.asarray(known_rows, dtype=bool)
        if known_prev_row is None:
            target = np.zeros(m, dtype=bool)
            target[self._mu] = True
            ok = (known_rows == target).all(axis=1)
            return np.where(ok, 0.0, -np.inf)
        prev = DetectionFrontier.from_known_row(known_prev_row)
        beta, gamma, s_valid = _row_fronts(state_rows)
        cl, cr, c_valid = _row_fronts(known_rows)
        adv_r = cr - prev.right
        adv_l = prev.left - cl
        valid = (s_valid & c_valid
                 & (adv_r >= 0) & (adv_l >= 0)
                 & (cl >= beta) & (cr <= gamma))
        log_p = np.zeros(n)
        log_p += np.where(adv_r > 0, adv_r * self._log_ph, 0.0)
        log_p += np.where(adv_l > 0, adv_l * self._log_ph, 0.0)
        log_p += np.where(cr != gamma, self._log_1mph, 0.0)
        log_p += np.where(cl != beta, self._log_1mph, 0.0)
        return np.where(valid, log_p, -np.inf)

    def aux_log_density(self, sim_rows, prev_rows, sim_known, prev_obs_row,
                        obs_row):
        """Normalized auxiliary for the correction step: the growth prior
        restricted to rows compatible with the retained (undetected) cells,
        times the probe kernel evaluated at the simulated detections.

        A flat auxiliary is not exact here: monotone growth pins part of the
        replaced block whenever a particle spread past the detected front, so
        the reachable set differs across particles.  Restricting and
        renormalizing the growth prior per particle removes that imbalance.
        Per side, with detection front d and previous front p, the candidate
        pre-correction fronts are {p, p+1} capped at d; a particle already
        past d keeps its own front, leaving a single candidate.
        """
        n, m = sim_rows.shape
        if prev_rows is None:
            return np.zeros(n)
        lf = self.transition_logpdf(prev_rows, sim_rows)
        lg = self.observation_logpdf(sim_rows, prev_obs_row, sim_known)
        obs = DetectionFrontier.from_known_row(obs_row)
        pl, pr, _ = _row_fronts(prev_rows)
        sl, sr, _ = _row_fronts(sim_rows)
        th = self.params.theta_exp
        grow_r = np.where(sr - pr == 1, self._log_th, self._log_1mth)
        grow_l = np.where(pl - sl == 1, self._log_th, self._log_1mth)
        with np.errstate(divide="ignore"):
            mass_r = np.log((1.0 - th) + th * (pr + 1 <= obs.right))
            mass_l = np.log((1.0 - th) + th * (pl - 1 >= obs.left))
        den_r = np.where(pr == m - 1, 0.0, np.where(sr > obs.right, grow_r, mass_r))
        den_l = np.where(pl == 0, 0.0, np.where(sl < obs.left, grow_l, mass_l))
        return lf + lg - den_r - den_l


def _truncated_run_lengths(u, gap, phi):
    """Number of consecutive detections before the first miss, capped by the
    number of invaded-but-undetected cells on that side."""
    gap = np.asarray(gap)
    if phi <= 0.0:
        return np.zeros(gap.shape, dtype=np.int64)
    if phi >= 1.0:
        return gap.astype(np.int64)
    with np.errstate(divide="ignore"):
        runs = np.floor(np.log(u) / math.log(phi))
    runs = np.where(np.isfinite(runs), runs, np.inf)
    return np.minimum(runs, gap).astype(np.int64)


@dataclass
class InvasionTruth:
    occupancy: np.ndarray        # (T, M) int8
    detection_time: np.ndarray   # (M,) step of first detection, 0 if never
    completion_time: int | None  # step at which every cell was invaded
    params: InvasionParams

    @property
    def steps(self):
        return self.occupancy.shape[0]


def simulate_invasion_truth(params, seed):
    """Run one ground-truth invasion with its surveillance record.

    The run stops at the step where every cell is invaded (recorded as the
    completion time) or at max_time, whichever comes first.  Expansion draws
    and probe draws live in separate stream domains, so two truths sharing a
    seed but differing in phi_det share the same invasion path.
    """
    model = InvasionModel(params)
    state = model.initial_sample(None, 1)
    known = model.observation_sample(None, state, None)
    det_time = np.zeros(params.cells, dtype=np.int64)
    det_time[known[0]] = 1
    rows = [state[0].copy()]
    t = 1
    while not state.all() and t < params.max_time:
        t += 1
        state = model.transition_sample(substream(seed, "truth_state", t), state)
        new_known = model.observation_sample(
            substream(seed, "truth_probe", t), state, known[0])
        newly = new_known[0] & ~known[0]
        det_time[newly] = t
        known = new_known
        rows.append(state[0].copy())
    occupancy = np.stack(rows)
    completion = t if bool(state.all()) else None
    return InvasionTruth(occupancy, det_time, completion, params)


def feed_from_invasion_truth(truth):
    """Presence-only feed: row i shows every cell detected by step i."""
    t, m = truth.occupancy.shape
    det = truth.detection_time
    steps = np.arange(1, t + 1)[:, None]
    known = (det[None, :] != 0) & (det[None, :] <= steps)
    values = known.astype(float)
    reveal = np.where(known, steps, 0).astype(np.int64)
    return ObservationFeed(values, reveal)


class EnumerationInfeasibleError(RuntimeError):
    """The front-pair state space is too large to enumerate exactly."""


@dataclass
class EnumerationResult:
    occupancy: np.ndarray    # (T, M) exact P(cell invaded at step i | full feed)
    log_evidence: float      # log probability of the whole feed


def _feed_frontiers(feed):
    frontiers = []
    for i in range(1, feed.steps + 1):
        frontiers.append(DetectionFrontier.from_known_row(feed.known_row(i)))
    return frontiers


def _g_grid(params, prev, cur, log_ph, log_1mph):
    """Probe-step probability for every candidate front pair (beta, gamma)."""
    m = params.cells
    adv_r = cur.right - prev.right
    adv_l = prev.left - cur.left
    base = 0.0
    if adv_r > 0:
        base += adv_r * log_ph
    if adv_l > 0:
        base += adv_l * log_ph
    beta = np.arange(m)[:, None]
    gamma = np.arange(m)[None, :]
    log_g = np.full((m, m), base)
    log_g += np.where(gamma != cur.right, log_1mph, 0.0)
    log_g += np.where(beta != cur.left, log_1mph, 0.0)
    valid = (beta <= cur.left) & (gamma >= cur.right)
    return np.where(valid, np.exp(log_g), 0.0)


def _f_side_factors(params, m):
    """Per-(move, side) expansion factor vectors over source fronts."""
    th = params.theta_exp
    beta = np.arange(m)
    gamma = np.arange(m)
    f_left = {
        0: np.where(beta == 0, 1.0, 1.0 - th),
        1: np.where(beta == 0, 0.0, th),
    }
    f_right = {
        0: np.where(gamma == m - 1, 1.0, 1.0 - th),
        1: np.where(gamma == m - 1, 0.0, th),
    }
    return f_left, f_right


def _shift(mat, dl, dr):
    """out[b, g] = mat[b + dl, g - dr] with zero fill (source-to-target map)."""
    m = mat.shape[0]
    out = np.zeros_like(mat)
    if dl == 0 and dr == 0:
        return mat.copy()
    bs = slice(dl, m)
    bt = slice(0, m - dl)
    gs = slice(0, m - dr) if dr else slice(0, m)
    gt = slice(dr, m) if dr else slice(0, m)
    out[bt, gt] = mat[bs, gs]
    return out


def _shift_back(mat, dl, dr):
    """out[b, g] = mat[b - dl, g + dr] with zero fill (target-to-source map)."""
    m = mat.shape[0]
    out = np.zeros_like(mat)
    bs = slice(0, m - dl)
    bt = slice(dl, m)
    gs = slice(dr, m) if dr else slice(0, m)
    gt = slice(0, m - dr) if dr else slice(0, m)
    out[bt, gt] = mat[bs, gs]
    return out


def exact_posterior_enumeration(params, feed, op_limit=int(2e7)):
    """Exact smoothed occupancy by dynamic programming over front pairs.

    The state of the invasion is its front pair, so the posterior over
    front-pair paths factorizes into per-step expansion and probe factors.
    Forward masses are filtered and normalized per step (their log normalizers
    sum to the log probability of the feed); a backward pass turns them into
    smoothed front-pair laws, and the occupancy of cell m at step i is the
    mass of pairs spanning m.  Refuses instances whose state space is too
    large to sweep exactly.
    """
    t_total = feed.steps
    m = params.cells
    if feed.n_coords != m:
        raise ValueError(f"feed has {feed.n_coords} cells, params say {m}")
    ops = 4 * t_total * m * m
    if ops > op_limit:
        raise EnumerationInfeasibleError(
            f"enumeration needs about {ops:.2e} state operations, "
            f"above the limit {op_limit:.2e}")
    frontiers = _feed_frontiers(feed)
    mu = params.origin - 1
    if frontiers[0].left != mu or frontiers[0].right != mu:
        raise FeedFormatError(
            "feed origin detection does not match the configured origin cell")
    log_ph = _log(params.phi_det)
    log_1mph = _log(1.0 - params.phi_det)
    f_left, f_right = _f_side_factors(params, m)

    alpha = np.zeros((m, m))
    alpha[mu, mu] = 1.0
    alphas = [alpha.copy()]
    g_grids = [None]
    log_evidence = 0.0
    for i in range(2, t_total + 1):
        grown = np.zeros((m, m))
        for dl in (0, 1):
            for dr in (0, 1):
                contrib = alpha * f_left[dl][:, None] * f_right[dr][None, :]
                grown += _shift(contrib, dl, dr)
        g = _g_grid(params, frontiers[i - 2], frontiers[i - 1], log_ph, log_1mph)
        alpha = grown * g
        norm = alpha.sum()
        if norm <= 0.0:
            raise FeedFormatError(
                f"feed has probability zero under these parameters at step {i}")
        alpha /= norm
        log_evidence += math.log(norm)
        alphas.append(alpha.copy())
        g_grids.append(g)

    occupancy = np.zeros((t_total, m))
    delta = np.ones((m, m))
    for i in range(t_total, 0, -1):
        post = alphas[i - 1] * delta
        post /= post.sum()
        occupancy[i - 1] = _span_mass(post)
        if i > 1:
            carried = g_grids[i - 1] * delta
            new_delta = np.zeros((m, m))
            for dl in (0, 1):
                for dr in (0, 1):
                    new_delta += (f_left[dl][:, None] * f_right[dr][None, :]
                                  * _shift_back(carried, dl, dr))
            peak = new_delta.max()
            if peak <= 0.0:
                raise FeedFormatError(
                    f"feed has probability zero under these parameters at step {i}")
            delta = new_delta / peak
    return EnumerationResult(occupancy, log_evidence)


def _span_mass(post):
    """occ[m] = total mass of front pairs (beta, gamma) with beta <= m <= gamma."""
    by_beta = np.cumsum(post, axis=0)           # beta <= m
    by_both = np.cumsum(by_beta[:, ::-1], axis=1)[:, ::-1]  # gamma >= m
    return np.diagonal(by_both).copy()
