"""Experiment runner: ``csi-supcon {generate,import,train,evaluate,ablate}``.

All commands read one JSON experiment config. Example::

    {
      "scenario": {"preset": "default", "rng_seed": 0},
      "positions": {"count": 1100, "seed": 0},
      "split": {"test_ratio": 0.1, "split_seed": 0},
      "encoder": {"projection_hidden": 512},
      "train": {"rng_seed": 0},
      "dm": {"rng_seed": 0},
      "metrics": ["supcon", "cmd", "svd", "magnitude", "dm"],
      "k": 4,
      "thresholds": [25.0],
      "output_dir": "runs/demo"
    }

``"dataset": "<dir>"`` replaces ``scenario``/``positions`` with a container on disk.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel_sim import DEFAULT_AREA, ChannelScenario, generate_dataset, sample_positions
from .dataset import FingerprintDatabase, SplitConfig, load_database, save_database, split
from .encoder import EncoderConfig, load_params
from .positioning import evaluate, predict_dm, predict_wknn
from .similarity import SimilarityMetric, build_fingerprint_index
from .trainer import TrainConfig, dm_train_config, train_direct_mapping, train_supcon

log = logging.getLogger("csi_supcon")

COLUMN_NAMES = {"dm": "DM", "supcon": "SupCon", "cmd": "CMD", "svd": "SVD", "magnitude": "Magn."}


@dataclass
class ExperimentConfig:
    scenario: dict | None = None
    positions: dict = field(default_factory=lambda: {"count": 1100, "seed": 0})
    dataset: str | None = None
    split: dict = field(default_factory=dict)
    encoder: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    dm: dict | None = None
    metrics: list = field(default_factory=lambda: ["supcon", "cmd", "svd", "magnitude"])
    k: int = 4
    thresholds: list = field(default_factory=lambda: [25.0])
    output_dir: str = "runs/experiment"
    ablation_grid: list = field(default_factory=lambda: [[1, 1], [16, 64]])

    def __post_init__(self):
        if self.scenario is None and self.dataset is None:
            raise ValueError("config needs either 'scenario' or 'dataset'")
        if self.dataset is not None and not Path(self.dataset).is_dir():
            raise FileNotFoundError(f"dataset directory {self.dataset} does not exist")
        unknown = set(self.metrics) - set(COLUMN_NAMES)
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        # validate the nested configs early
        self.split_config()
        self.train_config()
        if self.scenario is not None:
            ChannelScenario.from_dict(self.scenario)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file {path} does not exist")
        return cls(**json.loads(path.read_text()))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def split_config(self) -> SplitConfig:
        return SplitConfig(**self.split)

    def train_config(self, **overrides) -> TrainConfig:
        return TrainConfig(**{**self.train, **overrides})

    def dm_config(self) -> TrainConfig:
        return dm_train_config(**(self.dm or {}))

    def encoder_config(self, num_antennas: int, **overrides) -> EncoderConfig:
        return EncoderConfig(**{"input_size": num_antennas, **self.encoder, **overrides})


def load_data(cfg: ExperimentConfig) -> FingerprintDatabase:
    if cfg.dataset is not None:
        return load_database(cfg.dataset)
    scenario = ChannelScenario.from_dict(cfg.scenario)
    pos_cfg = {"area": DEFAULT_AREA, **cfg.positions}
    positions = sample_positions(int(pos_cfg["count"]), pos_cfg["area"], int(pos_cfg.get("seed", 0)))
    return generate_dataset(scenario, positions)


def cmd_generate(cfg: ExperimentConfig, out=None) -> Path:
    if cfg.scenario is None:
        raise ValueError("generate needs a 'scenario' section")
    out = Path(out or Path(cfg.output_dir) / "dataset")
    db = load_data(cfg)
    save_database(db, out)
    ChannelScenario.from_dict(cfg.scenario).save(out / "scenario.json")
    log.info("wrote %d samples (B=%d, N=%d) to %s", len(db), db.num_antennas, db.num_subcarriers, out)
    return out


def cmd_import(source, out) -> Path:
    """Copy a converted external dataset (container directory or ``.npz`` with ``csi``/``positions``)."""
    source, out = Path(source), Path(out)
    if source.is_dir():
        db = load_database(source)
    elif source.suffix == ".npz" and source.is_file():
        with np.load(source) as f:
            db = FingerprintDatabase(f["csi"], f["positions"])
    else:
        raise FileNotFoundError(f"{source} is neither a dataset directory nor an .npz file")
    db.source = "imported"
    save_database(db, out)
    log.info("imported %d samples (B=%d, N=%d) into %s", len(db), db.num_antennas, db.num_subcarriers, out)
    return out


def cmd_train(cfg: ExperimentConfig, out=None, train_overrides: dict | None = None) -> Path:
    run_dir = Path(out or Path(cfg.output_dir) / "run")
    run_dir.mkdir(parents=True, exist_ok=True)
    train_db, _ = split(load_data(cfg), cfg.split_config())
    if train_overrides:
        cfg = ExperimentConfig(**{**cfg.to_dict(), "train": {**cfg.train, **train_overrides}})
    cfg.save(run_dir / "config.json")
    enc_cfg = cfg.encoder_config(train_db.num_antennas)
    _, report = train_supcon(train_db, enc_cfg, cfg.train_config(), run_dir=run_dir)
    log.info("contrastive encoder: loss %.4f -> %.4f in %.1f s", report.epoch_loss[0], report.epoch_loss[-1], report.wall_clock)
    if cfg.dm is not None or "dm" in cfg.metrics:
        _, dm_report = train_direct_mapping(train_db, cfg.encoder_config(train_db.num_antennas, feature_dim=2), cfg.dm_config(), run_dir=run_dir)
        log.info("direct mapping: loss %.2f m -> %.2f m", dm_report.epoch_loss[0], dm_report.epoch_loss[-1])
    return run_dir


def _predictor(name: str, train_db, run_dir: Path, k: int):
    if name == "dm":
        model = load_params(run_dir / "dm_params.bin")
        return lambda csi: predict_dm(csi, model)
    metric = SimilarityMetric(name, load_params(run_dir / "params.bin") if name == "supcon" else None)
    index = build_fingerprint_index(train_db, metric)
    return lambda csi: predict_wknn(csi, index, k)


def cmd_evaluate(cfg: ExperimentConfig, run_dir, out=None) -> dict:
    """Evaluate each requested metric on the held-out split; writes report.json, table.csv, cdf_<metric>.csv."""
    run_dir = Path(run_dir)
    for name, fname in (("supcon", "params.bin"), ("dm", "dm_params.bin")):
        if name in cfg.metrics and not (run_dir / fname).is_file():
            raise FileNotFoundError(f"no {fname} in {run_dir}")
    out = Path(out or run_dir / "eval")
    out.mkdir(parents=True, exist_ok=True)
    train_db, test_db = split(load_data(cfg), cfg.split_config())
    results = {}
    for name in cfg.metrics:
        report = evaluate(test_db, _predictor(name, train_db, run_dir, cfg.k), cfg.thresholds)
        report.write_csv(out / f"cdf_{name}.csv")
        results[name] = report.summary()
        log.info("%-9s mean error %.2f m", name, report.mean)
    rho = cfg.split_config().test_ratio
    with open(out / "table.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rho"] + [COLUMN_NAMES[m] for m in cfg.metrics])
        w.writerow([rho] + [repr(results[m]["mean_error_m"]) for m in cfg.metrics])
    summary = {"test_ratio": rho, "num_train": len(train_db), "num_test": len(test_db), "k": cfg.k, "metrics": results}
    (out / "report.json").write_text(json.dumps(summary, indent=2))
    return summary


def cmd_ablate_pos_neg(cfg: ExperimentConfig, grid=None, out=None) -> Path:
    """One encoder per (|P_a|, |N_a|) grid point, same seeds; writes ablation.csv."""
    grid = [tuple(int(v) for v in g) for g in (grid or cfg.ablation_grid)]
    if not grid:
        raise ValueError("empty ablation grid")
    out = Path(out or Path(cfg.output_dir) / "ablation")
    out.mkdir(parents=True, exist_ok=True)
    eval_cfg = ExperimentConfig(**{**cfg.to_dict(), "metrics": ["supcon"], "dm": None})
    rows = []
    for P, N in grid:
        run_dir = cmd_train(eval_cfg, out / f"P{P}_N{N}", {"num_positives": P, "num_negatives": N})
        summary = cmd_evaluate(ExperimentConfig.load(run_dir / "config.json"), run_dir)
        rows.append((P, N, summary["metrics"]["supcon"]["mean_error_m"]))
    with open(out / "ablation.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["num_positives", "num_negatives", "mean_error_m"])
        for P, N, e in rows:
            w.writerow([P, N, repr(e)])
    return out


def _parse_grid(text: str) -> list[tuple[int, int]]:
    return [tuple(int(v) for v in item.split(",")) for item in text.split(";") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csi-supcon", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a dataset into the container format")
    g.add_argument("--config", required=True)
    g.add_argument("--out")

    i = sub.add_parser("import", help="ingest an externally converted dataset")
    i.add_argument("source")
    i.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train the contrastive (and optionally DM) encoder")
    t.add_argument("--config", required=True)
    t.add_argument("--out")

    e = sub.add_parser("evaluate", help="kNN / DM positioning on the held-out split")
    e.add_argument("--config", required=True)
    e.add_argument("--run", required=True, help="run directory produced by 'train'")
    e.add_argument("--out")

    a = sub.add_parser("ablate", help="sweep the number of positives and negatives")
    a.add_argument("--config", required=True)
    a.add_argument("--grid", help='e.g. "1,1;4,16;16,64"')
    a.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "import":
            print(cmd_import(args.source, args.out))
            return 0
        cfg = ExperimentConfig.load(args.config)
        if args.command == "generate":
            print(cmd_generate(cfg, args.out))
        elif args.command == "train":
            print(cmd_train(cfg, args.out))
        elif args.command == "evaluate":
            print(json.dumps(cmd_evaluate(cfg, args.run, args.out), indent=2))
        elif args.command == "ablate":
            print(cmd_ablate_pos_neg(cfg, _parse_grid(args.grid) if args.grid else None, args.out))
    except (OSError, ValueError, KeyError, TypeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
