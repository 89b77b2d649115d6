"""
Direct position regression
==========================

Instead of learning a similarity, the same encoder with a 2-D output can be
trained to regress (x, y) directly under the mean Euclidean error loss.
"""

from csi_supcon import (
    EncoderConfig, SplitConfig, default_scenario, evaluate, generate_dataset, predict_dm,
    sample_positions, split, train_direct_mapping,
)
from csi_supcon.trainer import dm_train_config

db = generate_dataset(default_scenario(rng_seed=0), sample_positions(1100, seed=0))
train, test = split(db, SplitConfig(100 / 1100, 0))

# outputs are shifted by the training centroid and scaled by the position spread
model, report = train_direct_mapping(train, EncoderConfig(input_size=train.num_antennas, feature_dim=2), dm_train_config())
print("training loss %.1f m -> %.1f m over %d epochs" % (report.epoch_loss[0], report.epoch_loss[-1], len(report.epoch_loss)))
print("test mean error %.2f m" % evaluate(test, lambda csi: predict_dm(csi, model)).mean)

# sanity check: a tiny training set should be memorized
tiny = train.subset(range(10))
cfg = dm_train_config(learning_rate=0.003, lr_halving_period_epochs=20, epochs=200)
_, rep = train_direct_mapping(tiny, EncoderConfig(input_size=train.num_antennas, feature_dim=2), cfg)
print("10-sample fit: %.3f m" % rep.epoch_loss[-1])
