"""Mini-batch training of the contrastive encoder and of the direct-mapping baseline."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .dataset import FingerprintDatabase, iterate_batches, positive_table
from .encoder import CsiEncoder, EncoderConfig, save_params
from .objective import dm_loss_torch, supcon_loss_torch
from .preprocess import preprocess_batch

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    lr_halving_period_epochs: int = 5
    weight_decay: float = 1e-4
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    epochs: int = 20
    batch_size: int = 32
    d_th: float = 25.0
    tau: float = 1.5
    num_positives: int = 16
    num_negatives: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        self.adam_betas = tuple(self.adam_betas)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for name in ("learning_rate", "lr_halving_period_epochs", "batch_size", "tau", "num_positives", "num_negatives"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0 or self.d_th < 0:
            raise ValueError("weight_decay and d_th must be non-negative")

    def lr_at_epoch(self, epoch: int) -> float:
        return self.learning_rate * 0.5 ** (epoch // self.lr_halving_period_epochs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def dm_train_config(**overrides) -> TrainConfig:
    """Direct-mapping recipe: lr 0.01 for 100 epochs, everything else as the contrastive recipe."""
    return TrainConfig(**{"learning_rate": 0.01, "epochs": 100, **overrides})


@dataclass
class TrainReport:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_lr: list[float] = field(default_factory=list)
    wall_clock: float = 0.0
    params_path: str | None = None
    config: dict = field(default_factory=dict)

    def write_loss_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "loss", "lr"])
            for e, (loss, lr) in enumerate(zip(self.epoch_loss, self.epoch_lr)):
                w.writerow([e, repr(loss), repr(lr)])


def _seed_torch(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def _optimizer(model, cfg: TrainConfig):
    # decoupled weight decay
    return torch.optim.AdamW(
        model.parameters(), lr=cfg.learning_rate, betas=cfg.adam_betas, eps=cfg.adam_eps, weight_decay=cfg.weight_decay
    )


def _check_finite(loss: torch.Tensor, epoch: int, batch: int) -> None:
    if not torch.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, batch {batch}")


def train_supcon(
    train_db: FingerprintDatabase,
    encoder_config: EncoderConfig,
    cfg: TrainConfig,
    run_dir=None,
) -> tuple[CsiEncoder, TrainReport]:
    """Train an encoder with the contrastive loss; optionally persist config, loss CSV and params to ``run_dir``."""
    if encoder_config.input_size != train_db.num_antennas:
        raise ValueError(f"encoder expects B={encoder_config.input_size}, data has B={train_db.num_antennas}")
    t0 = time.perf_counter()
    _seed_torch(cfg.rng_seed)
    model = CsiEncoder(encoder_config)
    opt = _optimizer(model, cfg)
    inputs = torch.as_tensor(preprocess_batch(train_db.csi), dtype=torch.float32)
    pos_table = positive_table(train_db, cfg.num_positives)
    report = TrainReport(config={"encoder": encoder_config.to_dict(), "train": cfg.to_dict()})

    model.train()
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at_epoch(epoch)
        for g in opt.param_groups:
            g["lr"] = lr
        losses, weights = [], []
        batches = iterate_batches(
            train_db, cfg.batch_size, cfg.num_positives, cfg.num_negatives, cfg.d_th,
            epoch_seed=(cfg.rng_seed, epoch), positives=pos_table,
        )
        for b, batch in enumerate(batches):
            idx = batch.all_indices()
            z = model(inputs[idx])  # anchors, positives and negatives share one BN pass
            where = lambda a: torch.as_tensor(np.searchsorted(idx, a))  # noqa: E731
            loss = supcon_loss_torch(z[where(batch.anchors)], z[where(batch.positives)], z[where(batch.negatives)], cfg.tau)
            _check_finite(loss, epoch, b)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
            weights.append(len(batch))
        report.epoch_loss.append(float(np.average(losses, weights=weights)))
        report.epoch_lr.append(lr)
        log.info("epoch %d  loss %.4f  lr %.2e", epoch, report.epoch_loss[-1], lr)
    model.eval()
    report.wall_clock = time.perf_counter() - t0
    if run_dir is not None:
        _persist(model, report, run_dir, "params.bin", "loss.csv")
    return model, report


def train_direct_mapping(
    train_db: FingerprintDatabase,
    encoder_config: EncoderConfig,
    cfg: TrainConfig | None = None,
    run_dir=None,
    target_scale: float | None = None,
) -> tuple[CsiEncoder, TrainReport]:
    """Regress positions directly (R = 2) under the mean-Euclidean-error loss.

    The head output is offset by the training-set centroid and multiplied by
    ``target_scale`` (default: the mean per-axis spread), both stored in the
    encoder's output affine, so the model and the loss work in meters.
    """
    if encoder_config.feature_dim != 2:
        raise ValueError(f"direct mapping needs feature_dim=2, got {encoder_config.feature_dim}")
    if encoder_config.output_normalized:
        raise ValueError("direct mapping output cannot be normalized")
    cfg = cfg or dm_train_config()
    t0 = time.perf_counter()
    _seed_torch(cfg.rng_seed)
    model = CsiEncoder(encoder_config)
    center = train_db.positions.mean(axis=0)
    scale = target_scale if target_scale is not None else float(train_db.positions.std(axis=0).mean()) or 1.0
    model.output_shift.copy_(torch.as_tensor(center, dtype=torch.float32))
    model.output_scale.fill_(scale)
    opt = _optimizer(model, cfg)
    inputs = torch.as_tensor(preprocess_batch(train_db.csi), dtype=torch.float32)
    targets = torch.as_tensor(train_db.positions, dtype=torch.float32)
    report = TrainReport(config={"encoder": encoder_config.to_dict(), "train": cfg.to_dict()})

    model.train()
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at_epoch(epoch)
        for g in opt.param_groups:
            g["lr"] = lr
        order = np.random.default_rng((cfg.rng_seed, epoch)).permutation(len(train_db))
        losses, weights = [], []
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = torch.as_tensor(order[start : start + cfg.batch_size])
            loss = dm_loss_torch(model(inputs[idx]), targets[idx])
            _check_finite(loss, epoch, b)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
            weights.append(len(idx))
        report.epoch_loss.append(float(np.average(losses, weights=weights)))
        report.epoch_lr.append(lr)
        log.info("DM epoch %d  loss %.3f m  lr %.2e", epoch, report.epoch_loss[-1], lr)
    model.eval()
    report.wall_clock = time.perf_counter() - t0
    if run_dir is not None:
        _persist(model, report, run_dir, "dm_params.bin", "dm_loss.csv")
    return model, report


def _persist(model, report: TrainReport, run_dir, params_name: str, loss_name: str) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    report.params_path = str(save_params(model, run_dir / params_name))
    report.write_loss_csv(run_dir / loss_name)
    snapshot = run_dir / (Path(params_name).stem + "_train_config.json")
    snapshot.write_text(json.dumps(report.config, indent=2))
