"""Sequential importance sampling with deterministic correction.

Particles are simulated forward under the model prior, deterministically
corrected to agree with exact partial observations, and reweighted on the
augmented space.  Only the time indices touched by a correction contribute
weight factors, so reweighting stays cheap even on long histories.
"""

__version__ = "0.1.0"

from .ar1 import Ar1Model, Ar1Params
from .ar1 import simulate_truth as simulate_ar1_truth
from .engine import (FilterResult, Model, ModelContractError, Particle,
                     ParticleCollapseError, compute_partial_weight,
                     correct_particle, effective_sample_size,
                     estimate_expectation, run_filter)
from .gold import (GaussianPosterior, bridge_posterior, compare_to_oracle,
                   oracle_for_coordinate, prior_posterior, tail_posterior,
                   weighted_ks_distance)
from .invasion import (EnumerationInfeasibleError, EnumerationResult,
                       InvasionModel, InvasionParams, InvasionTruth,
                       exact_posterior_enumeration, feed_from_invasion_truth,
                       simulate_invasion_truth)
from .observations import (FeedFormatError, ObservationFeed, feed_from_truth,
                           load_feed, validate_feed_file, write_feed)

__all__ = [
    "__version__",
    "Ar1Model", "Ar1Params", "simulate_ar1_truth",
    "FilterResult", "Model", "ModelContractError", "Particle",
    "ParticleCollapseError", "compute_partial_weight", "correct_particle",
    "effective_sample_size", "estimate_expectation", "run_filter",
    "GaussianPosterior", "bridge_posterior", "compare_to_oracle",
    "oracle_for_coordinate", "prior_posterior", "tail_posterior",
    "weighted_ks_distance",
    "EnumerationInfeasibleError", "EnumerationResult", "InvasionModel",
    "InvasionParams", "InvasionTruth", "exact_posterior_enumeration",
    "feed_from_invasion_truth", "simulate_invasion_truth",
    "FeedFormatError", "ObservationFeed", "feed_from_truth", "load_feed",
    "validate_feed_file", "write_feed",
]
