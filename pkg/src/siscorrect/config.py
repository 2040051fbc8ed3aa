"""Experiment configuration: flat JSON key-value files plus CLI overrides."""

import json
import os
from dataclasses import dataclass, field

from .ar1 import Ar1Params
from .invasion import InvasionParams
from .rng import MAX_SEED

MODELS = ("ar1", "invasion")
SCHEMES = ("u1", "u2")
RESAMPLERS = ("multinomial", "systematic")

_COMMON_KEYS = {"model", "n", "seed", "scheme", "resampler", "feed", "out",
                "figures"}
_AR1_KEYS = {"phi", "sigma2", "theta", "steps", "u1_bound_sds"}
_INVASION_KEYS = {"cells", "origin", "theta_exp", "phi_det", "max_time"}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    model: str
    n: int
    seed: int
    scheme: str = "u1"
    resampler: str = "multinomial"
    feed: str = "simulate"            # "simulate" or a feed file path
    out: str | None = None
    figures: bool = True
    # ar1
    phi: float | None = None
    sigma2: float | None = None
    theta: float | None = None
    steps: int | None = None
    u1_bound_sds: float = 8.0
    # invasion
    cells: int | None = None
    origin: int | None = None
    theta_exp: float | None = None
    phi_det: float | None = None
    max_time: int | None = None

    extras: dict = field(default_factory=dict, repr=False)

    def ar1_params(self):
        return Ar1Params(self.phi, self.sigma2, self.theta)

    def invasion_params(self):
        return InvasionParams(self.cells, self.origin, self.theta_exp,
                              self.phi_det, self.max_time)

    def as_dict(self):
        keys = sorted(_COMMON_KEYS | (_AR1_KEYS if self.model == "ar1"
                                      else _INVASION_KEYS))
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}


def load_config_file(path):
    """Read a flat JSON config; a run manifest is accepted transparently."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold one JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # manifest wrapper
    return data


def _require(raw, key, kind, check=None, what=""):
    if key not in raw:
        raise ConfigError(f"missing required config key {key!r}")
    val = raw[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        val = float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"config key {key!r} must be an integer")
    elif not isinstance(val, kind):
        raise ConfigError(f"config key {key!r} must be of type {kind.__name__}")
    if check is not None and not check(val):
        raise ConfigError(f"config key {key!r} is out of range{what}")
    return val


def parse_config(raw, for_run=True):
    """Validate a flat mapping into an ExperimentConfig.

    Unknown keys are rejected so typos cannot silently change an experiment.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a flat mapping")
    model = _require(raw, "model", str)
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    allowed = _COMMON_KEYS | (_AR1_KEYS if model == "ar1" else _INVASION_KEYS)
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    cfg = ExperimentConfig(
        model=model,
        n=_require(raw, "n", int, lambda v: v >= 2, " (need n >= 2)"),
        seed=_require(raw, "seed", int, lambda v: 0 <= v <= MAX_SEED,
                      " (need a 64-bit unsigned seed)"),
    )
    cfg.scheme = raw.get("scheme", "u1")
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}, got {cfg.scheme!r}")
    cfg.resampler = raw.get("resampler", "multinomial")
    if cfg.resampler not in RESAMPLERS:
        raise ConfigError(
            f"resampler must be one of {RESAMPLERS}, got {cfg.resampler!r}")
    feed = raw.get("feed", "simulate")
    if not isinstance(feed, str) or not feed:
        raise ConfigError("feed must be 'simulate' or a feed file path")
    cfg.feed = feed
    figures = raw.get("figures", True)
    if not isinstance(figures, bool):
        raise ConfigError("figures must be true or false")
    cfg.figures = figures
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out must be a directory path")
    cfg.out = out

    if model == "ar1":
        cfg.phi = _require(raw, "phi", float, lambda v: abs(v) < 1.0,
                           " (need |phi| < 1)")
        cfg.sigma2 = _require(raw, "sigma2", float, lambda v: v > 0.0,
                              " (need sigma2 > 0)")
        cfg.theta = _require(raw, "theta", float, lambda v: 0.0 <= v <= 1.0,
                             " (need theta in [0, 1])")
        bound = raw.get("u1_bound_sds", 8.0)
        if isinstance(bound, bool) or not isinstance(bound, (int, float)) \
                or not bound > 0.0:
            raise ConfigError("u1_bound_sds must be a positive number")
        cfg.u1_bound_sds = float(bound)
        if cfg.feed == "simulate":
            cfg.steps = _require(raw, "steps", int, lambda v: v >= 1,
                                 " (need steps >= 1)")
        elif "steps" in raw:
            cfg.steps = _require(raw, "steps", int, lambda v: v >= 1,
                                 " (need steps >= 1)")
    else:
        cfg.cells = _require(raw, "cells", int, lambda v: v >= 1,
                             " (need cells >= 1)")
        cfg.origin = _require(raw, "origin", int,
                              lambda v: 1 <= v <= raw.get("cells", 0),
                              " (need 1 <= origin <= cells)")
        cfg.theta_exp = _require(raw, "theta_exp", float,
                                 lambda v: 0.0 <= v <= 1.0,
                                 " (need theta_exp in [0, 1])")
        cfg.phi_det = _require(raw, "phi_det", float,
                               lambda v: 0.0 <= v <= 1.0,
                               " (need phi_det in [0, 1])")
        cfg.max_time = _require(raw, "max_time", int, lambda v: v >= 1,
                                " (need max_time >= 1)")
        if cfg.scheme == "u2":
            raise ConfigError(
                "the u2 scheme is defined for the ar1 model only")

    if for_run:
        if cfg.out is None:
            raise ConfigError("missing required config key 'out'")
        if cfg.feed != "simulate" and not os.path.exists(cfg.feed):
            raise ConfigError(f"feed file not found: {cfg.feed}")
    return cfg


def apply_overrides(raw, seed=None, particles=None, scheme=None, out=None,
                    feed=None, resampler=None, figures=None):
    """Overlay CLI flag values onto a raw config mapping."""
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = seed
    if particles is not None:
        raw["n"] = particles
    if scheme is not None:
        raw["scheme"] = scheme
    if out is not None:
        raw["out"] = out
    if feed is not None:
        raw["feed"] = feed
    if resampler is not None:
        raw["resampler"] = resampler
    if figures is not None:
        raw["figures"] = figures
    return raw
