"""Command line interface.

Verbs:
  run             run the particle filter, write reports and figures
  simulate-truth  draw a ground truth and its observation feed
  validate-feed   check a feed file against the format rules
  compare-gold    compare filter marginals to exact posteriors (ar1 only)
  enumerate       exact posterior occupancy by dynamic programming (invasion)

Exit codes: 0 success, 2 configuration or feed problems, 3 particle
collapse, 4 input/output failure.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .ar1 import Ar1Model, simulate_truth
from .config import (ConfigError, MODELS, RESAMPLERS, SCHEMES,
                     apply_overrides, load_config_file, parse_config)
from .engine import ParticleCollapseError, effective_sample_size, run_filter
from .gold import oracle_for_coordinate, weighted_ks_distance
from .invasion import (EnumerationInfeasibleError, InvasionModel,
                       exact_posterior_enumeration, feed_from_invasion_truth,
                       simulate_invasion_truth)
from .observations import (FeedFormatError, feed_from_truth, load_feed,
                           validate_feed_file, write_feed)
from .reports import (ensure_out_dir, fmt, write_gold_compare_csv,
                      write_heatmap_csv, write_manifest, write_summary_csv,
                      write_truth_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COLLAPSE = 3
EXIT_IO = 4


def _build_model(cfg):
    if cfg.model == "ar1":
        params = cfg.ar1_params()
        bound = cfg.u1_bound_sds * math.sqrt(params.stationary_variance)
        return Ar1Model(params, u1_bound=bound)
    return InvasionModel(cfg.invasion_params())


def _acquire_feed(cfg, out_dir, artifacts):
    """Simulate or load the observation feed; simulation leaves a record."""
    if cfg.feed == "simulate":
        if cfg.model == "ar1":
            values, reveal = simulate_truth(cfg.ar1_params(), cfg.steps,
                                            cfg.seed)
            feed = feed_from_truth(values, reveal)
        else:
            truth = simulate_invasion_truth(cfg.invasion_params(), cfg.seed)
            feed = feed_from_invasion_truth(truth)
            values = truth.occupancy.astype(float)
            reveal = feed.reveal_step
        truth_path = os.path.join(out_dir, "truth.csv")
        write_truth_csv(truth_path, values, reveal)
        feed_path = os.path.join(out_dir, "feed.txt")
        write_feed(feed_path, feed, cfg.model)
        artifacts += [truth_path, feed_path]
        return feed
    feed = load_feed(cfg.feed, cfg.model)
    if cfg.model == "invasion":
        if feed.n_coords != cfg.cells:
            raise ConfigError(
                f"feed has {feed.n_coords} cells, config says {cfg.cells}")
        cell = int(np.flatnonzero(feed.known_row(1))[0]) + 1
        if cell != cfg.origin:
            raise ConfigError(
                f"feed origin cell {cell} does not match config origin "
                f"{cfg.origin}")
    return feed


def _gold_rows(params, feed, result):
    """Oracle-versus-estimate rows for every never-revealed time index.

    Each estimate uses the settlement snapshot of that time: the weighted
    population captured as soon as the bracketing values arrived, before
    further resampling thins the support the comparison relies on.
    """
    known = feed.final_known()[:, 0]
    rows = []
    for i in range(1, feed.steps + 1):
        if known[i - 1]:
            continue
        kind, oracle = oracle_for_coordinate(params, feed.values[:, 0],
                                             known, i)
        cloud, w = result.cloud_at(i)
        ess = effective_sample_size(w)
        vals = cloud[:, 0]
        mean = float(np.dot(w, vals))
        var = float(np.dot(w, (vals - mean) ** 2))
        rows.append({
            "coord": i,
            "kind": kind,
            "oracle_mean": oracle.mean,
            "oracle_variance": oracle.variance,
            "est_mean": mean,
            "est_variance": var,
            "est_se": math.sqrt(max(var, 0.0) / ess),
            "ks_distance": weighted_ks_distance(vals, w, oracle),
            "particle_values": vals,
            "particle_weights": w,
        })
    return rows


def _load_cfg(args, forced_feed=None):
    raw = load_config_file(args.config)
    raw = apply_overrides(
        raw,
        seed=getattr(args, "seed", None),
        particles=getattr(args, "particles", None),
        scheme=getattr(args, "scheme", None),
        out=getattr(args, "out", None),
        feed=forced_feed if forced_feed else getattr(args, "feed", None),
        resampler=getattr(args, "resampler", None),
        figures=False if getattr(args, "no_figures", False) else None,
    )
    return parse_config(raw)


def _announce(artifacts):
    for path in artifacts:
        print(f"wrote {path}")


def _cmd_run(args):
    cfg = _load_cfg(args)
    out_dir = ensure_out_dir(cfg.out)
    artifacts = []
    feed = _acquire_feed(cfg, out_dir, artifacts)
    model = _build_model(cfg)
    result = run_filter(model, feed, cfg.n, cfg.seed,
                        scheme=cfg.scheme, resampler=cfg.resampler)

    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(summary_path, result)
    artifacts.append(summary_path)

    gold_rows = None
    if cfg.model == "ar1":
        gold_rows = _gold_rows(cfg.ar1_params(), feed, result)
        path = os.path.join(out_dir, "gold_compare.csv")
        write_gold_compare_csv(path, gold_rows)
        artifacts.append(path)
    else:
        path = os.path.join(out_dir, "heatmap.csv")
        write_heatmap_csv(path, result.occupancy())
        artifacts.append(path)

    manifest_cfg = cfg.as_dict()
    manifest_cfg.pop("out", None)  # the experiment, not where it landed
    manifest_path = os.path.join(out_dir, "manifest.json")
    write_manifest(manifest_path, __version__, "run", manifest_cfg)
    artifacts.append(manifest_path)

    if cfg.figures:
        from . import figures
        fig_dir = os.path.join(out_dir, "figures")
        if cfg.model == "ar1":
            artifacts += figures.render_ar1_figures(fig_dir, result, feed,
                                                    gold_rows)
        else:
            artifacts += figures.render_invasion_figures(
                fig_dir, result.occupancy(), feed)

    _announce(artifacts)
    print(f"final_ess {fmt(result.ess[-1])}")
    print(f"discarded_total {int(result.discards.sum())}")
    return EXIT_OK


def _cmd_simulate_truth(args):
    cfg = _load_cfg(args, forced_feed="simulate")
    out_dir = ensure_out_dir(cfg.out)
    artifacts = []
    feed = _acquire_feed(cfg, out_dir, artifacts)
    _announce(artifacts)
    print(f"steps {feed.steps}")
    print(f"coords {feed.n_coords}")
    return EXIT_OK


def _cmd_validate_feed(args):
    violations, shape = validate_feed_file(args.feed, args.model)
    for v in violations:
        print(f"violation: {v}")
    if violations:
        print(f"feed {args.feed}: {len(violations)} violation(s)")
        return EXIT_CONFIG
    print(f"feed {args.feed}: valid ({shape[0]} steps, {shape[1]} coordinates)")
    return EXIT_OK


def _cmd_compare_gold(args):
    cfg = _load_cfg(args)
    if cfg.model != "ar1":
        raise ConfigError("compare-gold is defined for the ar1 model only")
    out_dir = ensure_out_dir(cfg.out)
    artifacts = []
    feed = _acquire_feed(cfg, out_dir, artifacts)
    model = _build_model(cfg)
    result = run_filter(model, feed, cfg.n, cfg.seed,
                        scheme=cfg.scheme, resampler=cfg.resampler)
    gold_rows = _gold_rows(cfg.ar1_params(), feed, result)
    path = os.path.join(out_dir, "gold_compare.csv")
    write_gold_compare_csv(path, gold_rows)
    artifacts.append(path)
    if cfg.figures and gold_rows:
        from . import figures
        artifacts.append(figures.render_gold_figure(
            os.path.join(out_dir, "figures"), gold_rows))
    _announce(artifacts)
    print(f"coords_compared {len(gold_rows)}")
    if gold_rows:
        worst = max(r["ks_distance"] for r in gold_rows)
        print(f"max_ks_distance {fmt(worst)}")
    return EXIT_OK


def _cmd_enumerate(args):
    cfg = _load_cfg(args)
    if cfg.model != "invasion":
        raise ConfigError("enumerate is defined for the invasion model only")
    if cfg.feed == "simulate":
        raise ConfigError("enumerate requires a feed file, not 'simulate'")
    feed = load_feed(cfg.feed, "invasion")
    res = exact_posterior_enumeration(cfg.invasion_params(), feed)
    out_dir = ensure_out_dir(cfg.out)
    path = os.path.join(out_dir, "heatmap.csv")
    write_heatmap_csv(path, res.occupancy)
    _announce([path])
    print(f"log_evidence {fmt(res.log_evidence)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="siscorrect",
        description="Particle filtering with deterministic correction to "
                    "exact partial observations.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(sp, full=True):
        sp.add_argument("--config", required=True,
                        help="JSON config file or a previous run manifest")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default=None,
                        help="override the output directory")
        if full:
            sp.add_argument("--particles", type=int, default=None,
                            help="override the particle count")
            sp.add_argument("--scheme", choices=SCHEMES, default=None,
                            help="override the auxiliary weighting scheme")
            sp.add_argument("--resampler", choices=RESAMPLERS, default=None)
            sp.add_argument("--feed", default=None,
                            help="'simulate' or a feed file path")
            sp.add_argument("--no-figures", action="store_true",
                            help="skip figure rendering")

    sp = sub.add_parser("run", help="run the filter and write reports")
    add_config_flags(sp)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("simulate-truth",
                        help="simulate a ground truth and its feed")
    add_config_flags(sp, full=False)
    sp.set_defaults(func=_cmd_simulate_truth)

    sp = sub.add_parser("validate-feed", help="check a feed file")
    sp.add_argument("--feed", required=True)
    sp.add_argument("--model", required=True, choices=MODELS)
    sp.set_defaults(func=_cmd_validate_feed)

    sp = sub.add_parser("compare-gold",
                        help="compare filter marginals to exact posteriors "
                             "(ar1 only)")
    add_config_flags(sp)
    sp.set_defaults(func=_cmd_compare_gold)

    sp = sub.add_parser("enumerate",
                        help="exact posterior occupancy by dynamic "
                             "programming (invasion only)")
    sp.add_argument("--config", required=True)
    sp.add_argument("--feed", default=None, help="feed file path")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_enumerate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FeedFormatError, EnumerationInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParticleCollapseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
