"""
How many positives and negatives?
=================================

Retrain the encoder with different numbers of positives and negatives per
anchor and compare kNN errors. Runs through the experiment runner, so every
grid point leaves a run directory with config, losses and parameters.
The full grid takes a few minutes.
"""

import csv

from csi_supcon.cli import ExperimentConfig, cmd_ablate_pos_neg

cfg = ExperimentConfig(
    scenario={"preset": "default", "rng_seed": 0},
    positions={"count": 1100, "seed": 0},
    split={"test_ratio": 100 / 1100, "split_seed": 0},
    output_dir="demo_ablation",
)
out = cmd_ablate_pos_neg(cfg, grid=[(1, 1), (4, 16), (16, 64)])

with open(out / "ablation.csv") as f:
    for row in csv.DictReader(f):
        print("|P|=%-3s |N|=%-3s mean error %.2f m" % (row["num_positives"], row["num_negatives"], float(row["mean_error_m"])))
