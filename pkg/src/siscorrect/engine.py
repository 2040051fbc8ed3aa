"""Simulate-then-correct particle engine.

Particles are propagated under the model prior, deterministically corrected to
match every exactly observed coordinate, and reweighted so the weighted
population targets the conditional law of the unobserved coordinates.  The
importance weight of a correction decomposes over time indices, and the
per-index factor is 1 wherever neither the index nor its predecessor changed,
so only indices touched by the current correction are ever computed.

Two auxiliary schemes are supported:

* ``u1``: flat density over a bounded box around the replaced coordinates.
  The box volume is common to all particles and cancels when weights are
  normalized; a particle whose replaced coordinates fell outside the box gets
  weight zero and is discarded before normalization.  The per-index factors
  are prior density ratios of corrected over uncorrected history.
* ``u2``: the prior itself restricted to the set of histories compatible with
  the correction.  Factors shared by the corrected density and the
  restriction mass cancel inside each particle, leaving corrected prior
  factors at touched indices over the closed-form mass of the replaced block.
  Only models that expose that mass support this scheme.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .rng import substream
from .resampling import SCHEMES, resample_indices

AUX_SCHEMES = ("u1", "u2")


class ParticleCollapseError(RuntimeError):
    """Every particle weight vanished at one step; the run cannot continue."""

    def __init__(self, step, detail=""):
        self.step = step
        msg = f"particle collapse at step {step}: all particle weights are zero"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ModelContractError(RuntimeError):
    """A model density or sampler violated its contract (e.g. zero density
    on a value the model itself produced, yielding an infinite weight)."""


class Model(ABC):
    """Markov model plus observation process consumed by the engine.

    ``missing_at_random`` declares that the revelation process does not
    depend on the state; its density then cancels from every weight ratio and
    the engine neither simulates nor evaluates it.
    """

    n_coords = 1
    state_dtype = np.float64
    missing_at_random = True
    supports_u2 = False

    @abstractmethod
    def initial_sample(self, gen, n):
        """Draw n first rows, shape (n, M)."""

    @abstractmethod
    def initial_logpdf(self, rows):
        """Log density of first rows, shape (n,)."""

    @abstractmethod
    def transition_sample(self, gen, prev):
        """Draw successor rows given (n, M) predecessors."""

    @abstractmethod
    def transition_logpdf(self, prev, cur):
        """Log transition density, shape (n,); -inf marks impossible moves."""

    def observation_sample(self, gen, state_rows, known_prev_row):
        raise NotImplementedError("state-coupled observation process not defined")

    def observation_logpdf(self, state_rows, known_prev_row, known_rows):
        raise NotImplementedError("state-coupled observation process not defined")

    def u1_log_indicator(self, replaced_values):
        """Log indicator of the u1 box, shape (n,).

        ``replaced_values`` holds, per particle, the pre-correction values at
        the newly observed cells (shape (n, k)).  Models over finite state
        spaces need no box; the default accepts everything.
        """
        return np.zeros(replaced_values.shape[0])

    def aux_log_density(self, sim_rows, prev_rows, sim_known, prev_obs_row,
                        obs_row):
        """Log density, up to a particle-independent constant, of the
        pre-correction block under the auxiliary that pairs each corrected
        particle with its original.

        The default, 0, is a flat auxiliary with a shared normalizer.  That
        is exact when every original block is reachable from every corrected
        one (unconstrained real-valued states).  Models whose support ties
        the replaced cells to the retained ones must override this with a
        normalized density; a flat auxiliary would then weight particles by
        how much of its mass their support happens to cover.
        """
        return 0.0

    def u2_log_normalizer(self, corrected, newly_times):
        raise NotImplementedError("model does not define a u2 restriction mass")


@dataclass
class Particle:
    """Single-particle view: one trajectory with its knowledge state."""

    trajectory: np.ndarray            # (t, M)
    knowledge: np.ndarray             # (t, M) bool
    log_weight: float = 0.0
    partial_log: dict = field(default_factory=dict)
    stream: int = 0

    @property
    def steps(self):
        return self.trajectory.shape[0]


def correct_particle(particle, values, known):
    """Overwrite every observed coordinate with its exact value.

    Returns the corrected particle and the (row, col) arrays of cells whose
    knowledge is new relative to the particle's own knowledge state.
    """
    traj = np.array(particle.trajectory, copy=True)
    known = np.asarray(known, dtype=bool)
    if known.shape != traj.shape:
        raise ValueError("observation mask shape does not match trajectory")
    newly = known & ~particle.knowledge
    traj[known] = np.asarray(values, dtype=float)[known]
    out = Particle(traj, known.copy(), particle.log_weight,
                   dict(particle.partial_log), particle.stream)
    rows, cols = np.nonzero(newly)
    return out, (rows, cols)


def compute_partial_weight(model, original, corrected, i):
    """Log weight factor at time index i (1-based) for one correction.

    The factor is the ratio of the corrected history's transition density at
    index i over the uncorrected one, times the matching observation-process
    ratio for models where that process depends on the state.  It equals 0 in
    log space whenever index i and i-1 are untouched.  +inf is a contract
    violation: the uncorrected history always has positive density.
    """
    if not 1 <= i <= original.steps:
        raise ValueError(f"index {i} outside history of length {original.steps}")
    term = _f_log_ratio_single(model, original.trajectory, corrected.trajectory, i)
    if not model.missing_at_random:
        term += _g_log_ratio_single(model, original, corrected, i)
    if np.isnan(term) or term == np.inf:
        raise ModelContractError(
            f"uncorrected history has zero density at index {i}; "
            "weight ratio is undefined"
        )
    return float(term)


def _f_log_ratio_single(model, orig_traj, corr_traj, i):
    if i == 1:
        num = model.initial_logpdf(corr_traj[0:1])[0]
        den = model.initial_logpdf(orig_traj[0:1])[0]
    else:
        num = model.transition_logpdf(corr_traj[i - 2:i - 1], corr_traj[i - 1:i])[0]
        den = model.transition_logpdf(orig_traj[i - 2:i - 1], orig_traj[i - 1:i])[0]
    with np.errstate(invalid="ignore"):
        # -inf minus -inf is NaN; the caller turns that into a contract error
        return num - den


def _g_log_ratio_single(model, original, corrected, i):
    prev_c = corrected.knowledge[i - 2] if i >= 2 else None
    prev_o = original.knowledge[i - 2] if i >= 2 else None
    num = model.observation_logpdf(corrected.trajectory[i - 1:i], prev_c,
                                   corrected.knowledge[i - 1:i])[0]
    den = model.observation_logpdf(original.trajectory[i - 1:i], prev_o,
                                   original.knowledge[i - 1:i])[0]
    return num - den


def effective_sample_size(weights):
    w = np.asarray(weights, dtype=float)
    s = np.sum(w * w)
    if s <= 0.0:
        raise ValueError("weights carry no mass")
    return 1.0 / s


def estimate_expectation(values, weights):
    """Weighted posterior expectation of per-particle statistics."""
    return np.average(np.asarray(values, dtype=float), weights=weights, axis=0)


def normalize_log_weights(log_weights, step):
    """Max-shifted exponentiation of log weights.

    Returns (weights, n_discarded) where discarded particles are those whose
    log weight is -inf; they keep exactly zero weight.  Raises
    ParticleCollapseError when nothing survives and ModelContractError on
    +inf or NaN entries.
    """
    lw = np.asarray(log_weights, dtype=float)
    if np.isnan(lw).any() or (lw == np.inf).any():
        raise ModelContractError(f"non-finite positive log weight at step {step}")
    alive = lw > -np.inf
    n_disc = int(lw.size - alive.sum())
    if n_disc == lw.size:
        raise ParticleCollapseError(step)
    w = np.zeros(lw.size)
    shift = lw[alive].max()
    w[alive] = np.exp(lw[alive] - shift)
    w /= w.sum()
    return w, n_disc


def weighted_mean_var(rows, weights):
    mean = np.einsum("n,nm->m", weights, rows)
    var = np.einsum("n,nm->m", weights, (rows - mean) ** 2)
    return mean, var


def weighted_quantile(rows, weights, q):
    """Step-function inverse CDF per column; deterministic for fixed input."""
    n, m = rows.shape
    out = np.empty(m)
    for j in range(m):
        order = np.argsort(rows[:, j], kind="stable")
        cum = np.cumsum(weights[order])
        k = int(np.searchsorted(cum, q * cum[-1], side="left"))
        out[j] = rows[order[min(k, n - 1)], j]
    return out


@dataclass
class FilterResult:
    means: np.ndarray          # (T, M) weighted mean of row t at step t
    variances: np.ndarray      # (T, M)
    q05: np.ndarray            # (T, M)
    q95: np.ndarray            # (T, M)
    ess: np.ndarray            # (T,) effective sample size before resampling
    discards: np.ndarray       # (T,) zero-weight particles dropped at each step
    final_traj: np.ndarray     # (n, T, M) corrected trajectories at the horizon
    final_weights: np.ndarray  # (n,) normalized weights at the horizon
    final_known: np.ndarray    # (T, M) knowledge mask at the horizon
    partials: list | None = None
    # per missing time, the weighted row snapshot taken at its settlement
    # step, before later resampling rounds thin its support
    resolved: dict | None = None

    @property
    def steps(self):
        return self.means.shape[0]

    def occupancy(self):
        """Weighted mean of every history cell under the final population."""
        return np.einsum("n,ntm->tm", self.final_weights, self.final_traj)

    def cloud_at(self, i):
        """Weighted particle values for time i: the settlement snapshot when
        one was recorded, otherwise the horizon population."""
        if self.resolved is not None and i in self.resolved:
            return self.resolved[i]
        return self.final_traj[:, i - 1, :], self.final_weights


def _settlement_steps(feed):
    """Map step -> trajectory times whose conditional law stops changing
    there, given the feed's full revelation schedule.

    A missing time in a scalar chain is bracketed by its nearest revealed
    neighbours; once both neighbouring values are in, later revelations are
    conditionally independent of it, so the weighted population right after
    that step is the best approximation the run will ever hold.  Wider rows
    admit no such bracketing and settle at the horizon.
    """
    t_total = feed.steps
    final = feed.final_known()
    missing = [i for i in range(1, t_total + 1) if not final[i - 1].all()]
    out = {}
    if feed.n_coords > 1:
        if missing:
            out[t_total] = missing
        return out
    revealed = np.flatnonzero(final[:, 0]) + 1
    reveal_step = feed.reveal_step[:, 0]
    for i in missing:
        below = revealed[revealed < i]
        above = revealed[revealed > i]
        t_star = i
        if below.size:
            t_star = max(t_star, int(reveal_step[below[-1] - 1]))
        if above.size:
            t_star = max(t_star, int(reveal_step[above[0] - 1]))
        out.setdefault(t_star, []).append(i)
    return out


def _f_log_terms(model, traj, orig_rows, indices, ratio):
    """Per-index log density terms over the population.

    With ratio=True returns corrected-over-original density ratios; with
    ratio=False returns the corrected history's own log density factors.
    """
    n = traj.shape[0]
    terms = {}
    for i in indices:
        corr_cur = traj[:, i - 1, :]
        corr_prev = traj[:, i - 2, :] if i >= 2 else None
        if i == 1:
            num = model.initial_logpdf(corr_cur)
        else:
            num = model.transition_logpdf(corr_prev, corr_cur)
        if ratio:
            orig_cur = orig_rows.get(i, corr_cur)
            orig_prev = orig_rows.get(i - 1, corr_prev)
            if i == 1:
                den = model.initial_logpdf(orig_cur)
            else:
                den = model.transition_logpdf(orig_prev, orig_cur)
            term = num - den
        else:
            term = num.astype(float, copy=True)
        terms[i] = np.asarray(term, dtype=float)
        if np.isnan(terms[i]).any() or (terms[i] == np.inf).any():
            raise ModelContractError(
                f"zero density on a sampled history at index {i}"
            )
    assert n == traj.shape[0]
    return terms


def run_filter(model, feed, n, seed, scheme="u1", resampler="multinomial",
               record_partials=False):
    """Run the correction filter over a feed; see FilterResult for outputs.

    The population is resampled after every step (weights reset to 1/n); the
    returned population is the corrected, weighted one at the horizon, before
    any final resampling.  Identical (model, feed, n, seed, scheme, resampler)
    yield bit-identical results.
    """
    if scheme not in AUX_SCHEMES:
        raise ValueError(f"unknown auxiliary scheme {scheme!r}")
    if resampler not in SCHEMES:
        raise ValueError(f"unknown resampling scheme {resampler!r}")
    if scheme == "u2" and not model.supports_u2:
        raise ValueError("model does not support the u2 scheme")
    if scheme == "u2" and not model.missing_at_random:
        raise ValueError("u2 scheme requires a state-free revelation process")
    if feed.n_coords != model.n_coords:
        raise ValueError(
            f"feed has {feed.n_coords} coordinates, model expects {model.n_coords}"
        )
    n = int(n)
    if n < 1:
        raise ValueError("particle count must be positive")

    t_total = feed.steps
    m = feed.n_coords
    means = np.zeros((t_total, m))
    variances = np.zeros((t_total, m))
    q05 = np.zeros((t_total, m))
    q95 = np.zeros((t_total, m))
    ess = np.zeros(t_total)
    discards = np.zeros(t_total, dtype=np.int64)
    partials = [] if record_partials else None

    traj = None
    float_state = np.issubdtype(np.dtype(model.state_dtype), np.floating)
    settle_at = _settlement_steps(feed)
    resolved = {}
    for t in range(1, t_total + 1):
        if t == 1:
            rows = model.initial_sample(substream(seed, "init", 1), n)
            traj = np.array(rows, dtype=model.state_dtype)[:, None, :]
        else:
            rows = model.transition_sample(substream(seed, "transition", t),
                                           traj[:, -1, :])
            traj = np.concatenate([traj, rows[:, None, :]], axis=1)
        if float_state and not np.isfinite(traj[:, -1, :]).all():
            raise ModelContractError(f"sampler produced non-finite state at step {t}")

        sim_known = None
        if not model.missing_at_random:
            prev_row = feed.known_row(t - 1) if t >= 2 else None
            sim_known = model.observation_sample(
                substream(seed, "observation", t), traj[:, -1, :], prev_row)

        z_vals, z_known = feed.matrix_at(t)
        newly = feed.newly_known_at(t)
        s_times = [int(i) + 1 for i in np.flatnonzero(newly.any(axis=1))]
        idx = {i for i in s_times} | {i + 1 for i in s_times if i + 1 <= t}
        if not model.missing_at_random:
            # the simulated knowledge row is replaced by the observed one at
            # every step, so index t always carries an observation ratio
            idx.add(t)
        idx = sorted(idx)

        orig_rows = {i: traj[:, i - 1, :].copy() for i in s_times}
        rr, cc = np.nonzero(newly)
        if rr.size:
            traj[:, rr, cc] = z_vals[rr, cc]

        if scheme == "u1":
            terms = _f_log_terms(model, traj, orig_rows, idx, ratio=True)
            log_w = np.zeros(n)
            for i in idx:
                log_w += terms[i]
            if not model.missing_at_random:
                g_terms = _g_log_terms(model, feed, traj, orig_rows,
                                       sim_known, z_known, idx, t)
                for i, term in g_terms.items():
                    log_w += term
                    terms[i] = terms[i] + term
                aux = np.asarray(model.aux_log_density(
                    orig_rows.get(t, traj[:, t - 1, :]),
                    traj[:, t - 2, :] if t >= 2 else None,
                    sim_known,
                    feed.known_row(t - 1) if t >= 2 else None,
                    z_known[t - 1]), dtype=float)
                log_w += aux
                terms[0] = aux
            if rr.size:
                replaced = np.stack([orig_rows[r + 1][:, c] for r, c in zip(rr, cc)],
                                    axis=1)
                log_w += model.u1_log_indicator(replaced)
        else:
            terms = _f_log_terms(model, traj, orig_rows, idx, ratio=False)
            log_w = np.zeros(n)
            for i in idx:
                log_w += terms[i]
            if s_times:
                log_norm = model.u2_log_normalizer(traj, s_times)
                if (log_norm == -np.inf).any():
                    raise ParticleCollapseError(
                        t, "u2 restriction mass vanished")
                log_w -= log_norm
                terms[0] = -np.asarray(log_norm, dtype=float)

        weights, n_disc = normalize_log_weights(log_w, t)
        if record_partials:
            partials.append(terms)

        means[t - 1], variances[t - 1] = weighted_mean_var(
            traj[:, t - 1, :].astype(float), weights)
        q05[t - 1] = weighted_quantile(traj[:, t - 1, :].astype(float), weights, 0.05)
        q95[t - 1] = weighted_quantile(traj[:, t - 1, :].astype(float), weights, 0.95)
        ess[t - 1] = effective_sample_size(weights)
        discards[t - 1] = n_disc

        for i in settle_at.get(t, ()):
            resolved[i] = (traj[:, i - 1, :].astype(float, copy=True), weights)

        if t < t_total:
            order = resample_indices(weights, resampler,
                                     substream(seed, "resample", t))
            traj = traj[order]
        else:
            final_weights = weights

    return FilterResult(means, variances, q05, q95, ess, discards,
                        traj, final_weights, feed.final_known(), partials,
                        resolved)


def _g_log_terms(model, feed, traj, orig_rows, sim_known, z_known, indices, t):
    """Observation-process log ratios at touched indices.

    For historical indices both histories share the knowledge recorded at
    that step; at the current step the corrected history carries the observed
    knowledge row while the uncorrected one carries the simulated row.
    """
    n = traj.shape[0]
    terms = {}
    for i in indices:
        prev_row = feed.known_row(i - 1) if i >= 2 else None
        if i < t:
            cur_row = np.broadcast_to(feed.known_row(i), (n, feed.n_coords))
            corr_state = traj[:, i - 1, :]
            orig_state = orig_rows.get(i, corr_state)
            num = model.observation_logpdf(corr_state, prev_row, cur_row)
            den = model.observation_logpdf(orig_state, prev_row, cur_row)
        else:
            obs_row = np.broadcast_to(z_known[t - 1], (n, feed.n_coords))
            corr_state = traj[:, t - 1, :]
            orig_state = orig_rows.get(t, corr_state)
            num = model.observation_logpdf(corr_state, prev_row, obs_row)
            den = model.observation_logpdf(orig_state, prev_row, sim_known)
        term = np.asarray(num, dtype=float) - np.asarray(den, dtype=float)
        if np.isnan(term).any() or (term == np.inf).any():
            raise ModelContractError(
                f"simulated observation history has zero density at index {i}"
            )
        terms[i] = term
    return terms
