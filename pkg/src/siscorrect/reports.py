"""Delimited output files for filter runs.

All floats are written with repr-faithful %.17g formatting so that a rerun
from the recorded manifest reproduces every file byte for byte.
"""

import csv
import json
import os

ARTIFACT_NAME = "siscorrect-run"


def fmt(x):
    """Render a float so it round-trips exactly."""
    return f"{float(x):.17g}"


def write_summary_csv(path, result):
    """Per-step, per-coordinate posterior summaries of the current row."""
    t_total = result.steps
    m = result.means.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "coord", "mean", "variance", "q05", "q95",
                         "ess", "discarded"])
        for t in range(t_total):
            for c in range(m):
                writer.writerow([
                    t + 1, c + 1,
                    fmt(result.means[t, c]), fmt(result.variances[t, c]),
                    fmt(result.q05[t, c]), fmt(result.q95[t, c]),
                    fmt(result.ess[t]), int(result.discards[t]),
                ])


def write_heatmap_csv(path, occupancy):
    """Final-population occupancy probabilities, one row per step."""
    t_total, m = occupancy.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"cell_{c + 1}" for c in range(m)])
        for t in range(t_total):
            writer.writerow([fmt(v) for v in occupancy[t]])


def write_gold_compare_csv(path, rows):
    """One row per hidden coordinate: oracle moments next to estimates."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coord", "kind", "oracle_mean", "oracle_variance",
                         "est_mean", "est_variance", "est_se", "ks_distance"])
        for row in rows:
            writer.writerow([
                row["coord"], row["kind"],
                fmt(row["oracle_mean"]), fmt(row["oracle_variance"]),
                fmt(row["est_mean"]), fmt(row["est_variance"]),
                fmt(row["est_se"]), fmt(row["ks_distance"]),
            ])


def write_truth_csv(path, values, reveal_step):
    """Simulated ground truth: value and reveal step per (time, coord)."""
    t_total, m = values.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "coord", "value", "reveal_step"])
        for t in range(t_total):
            for c in range(m):
                writer.writerow([t + 1, c + 1, fmt(values[t, c]),
                                 int(reveal_step[t, c])])


def write_manifest(path, version, command, config):
    """Record everything needed to reproduce the run."""
    payload = {
        "artifact": ARTIFACT_NAME,
        "command": command,
        "config": config,
        "version": version,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
