"""Fingerprint database, on-disk container, splitting and contrastive sampling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

CONTAINER_VERSION = 1


@dataclass
class FingerprintDatabase:
    """Ordered CSI samples ``csi[i]`` (B x N, complex64) with positions ``positions[i]`` (2-D, meters).

    ``indices`` records where each sample sits in the database it was split from.
    """

    csi: np.ndarray
    positions: np.ndarray
    source: str = "synthetic"
    indices: np.ndarray | None = None

    def __post_init__(self):
        self.csi = np.asarray(self.csi, dtype=np.complex64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.csi.ndim != 3:
            raise ValueError(f"csi must have shape (I, B, N), got {self.csi.shape}")
        if self.csi.shape[0] < 1:
            raise ValueError("database must hold at least one sample")
        if self.positions.shape != (self.csi.shape[0], 2):
            raise ValueError(f"positions must have shape ({self.csi.shape[0]}, 2), got {self.positions.shape}")
        if self.indices is None:
            self.indices = np.arange(self.csi.shape[0])
        self.indices = np.asarray(self.indices, dtype=np.int64)

    def __len__(self) -> int:
        return self.csi.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.csi.shape[1]

    @property
    def num_subcarriers(self) -> int:
        return self.csi.shape[2]

    @property
    def meta(self) -> dict:
        return {"B": self.num_antennas, "N": self.num_subcarriers, "I": len(self), "source": self.source}

    def subset(self, idx) -> "FingerprintDatabase":
        idx = np.asarray(idx, dtype=np.int64)
        return FingerprintDatabase(self.csi[idx], self.positions[idx], self.source, self.indices[idx])


def save_database(db: FingerprintDatabase, directory) -> Path:
    """Write ``manifest.json``, ``csi.bin`` and ``positions.bin`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "B": db.num_antennas,
        "N": db.num_subcarriers,
        "I": len(db),
        "dtype": "complex64",
        "layout": "row-major [I,B,N]",
        "version": CONTAINER_VERSION,
        "source": db.source,
    }
    interleaved = np.empty(db.csi.shape + (2,), dtype="<f4")
    interleaved[..., 0] = db.csi.real
    interleaved[..., 1] = db.csi.imag
    (directory / "csi.bin").write_bytes(interleaved.tobytes(order="C"))
    (directory / "positions.bin").write_bytes(db.positions.astype("<f8").tobytes(order="C"))
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_database(directory) -> FingerprintDatabase:
    directory = Path(directory)
    if not (directory / "manifest.json").is_file():
        raise FileNotFoundError(f"no manifest.json in {directory}")
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("version") != CONTAINER_VERSION:
        raise ValueError(f"unsupported container version {manifest.get('version')!r}")
    if manifest.get("dtype") != "complex64":
        raise ValueError(f"unsupported dtype {manifest.get('dtype')!r}")
    I, B, N = int(manifest["I"]), int(manifest["B"]), int(manifest["N"])
    raw = np.frombuffer((directory / "csi.bin").read_bytes(), dtype="<f4")
    if raw.size != I * B * N * 2:
        raise ValueError(f"csi.bin holds {raw.size} floats, manifest implies {I * B * N * 2}")
    pos = np.frombuffer((directory / "positions.bin").read_bytes(), dtype="<f8")
    if pos.size != I * 2:
        raise ValueError(f"positions.bin holds {pos.size} floats, manifest implies {I * 2}")
    raw = raw.reshape(I, B, N, 2)
    csi = (raw[..., 0] + 1j * raw[..., 1]).astype(np.complex64)
    return FingerprintDatabase(csi, pos.reshape(I, 2).copy(), source=manifest.get("source", "imported"))


@dataclass(frozen=True)
class SplitConfig:
    test_ratio: float = 0.1
    split_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_ratio < 1.0:
            raise ValueError(f"test_ratio must lie in (0, 1), got {self.test_ratio}")


def num_test_samples(num_samples: int, test_ratio: float) -> int:
    return int(math.floor(test_ratio * num_samples + 0.5))


def split(db: FingerprintDatabase, cfg: SplitConfig) -> tuple[FingerprintDatabase, FingerprintDatabase]:
    """Random disjoint train/test partition with ``round(rho * I)`` test samples."""
    I = len(db)
    n_test = num_test_samples(I, cfg.test_ratio)
    if math.floor(cfg.test_ratio * I) < 1 or n_test < 1 or I - n_test < 1:
        raise ValueError(f"test_ratio={cfg.test_ratio} gives a degenerate split of {I} samples")
    perm = np.random.default_rng(cfg.split_seed).permutation(I)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return db.subset(train_idx), db.subset(test_idx)


def _distances(train: FingerprintDatabase, anchor_index: int) -> np.ndarray:
    return np.linalg.norm(train.positions - train.positions[anchor_index], axis=1)


def find_positives(train: FingerprintDatabase, anchor_index: int, count: int) -> np.ndarray:
    """The ``count`` geographically nearest other samples; ties go to the smaller index."""
    if not 1 <= count <= len(train) - 1:
        raise ValueError(f"cannot take {count} positives from {len(train)} training samples")
    d = _distances(train, anchor_index)
    d[anchor_index] = np.inf
    return np.argsort(d, kind="stable")[:count]


def positive_table(train: FingerprintDatabase, count: int) -> np.ndarray:
    """``find_positives`` for every anchor, stacked into an (I, count) table."""
    return np.stack([find_positives(train, a, count) for a in range(len(train))])


def sample_negatives(
    train: FingerprintDatabase, anchor_index: int, count: int, d_th: float, seed, exclude=None
) -> np.ndarray:
    """Uniformly draw ``count`` distinct samples farther than ``d_th`` from the anchor.

    ``seed`` may be an int or a ``numpy.random.Generator``; indices in
    ``exclude`` (e.g. the anchor's positives) are never drawn.
    """
    d = _distances(train, anchor_index)
    eligible = d > d_th
    eligible[anchor_index] = False
    if exclude is not None:
        eligible[np.asarray(exclude, dtype=np.int64)] = False
    eligible = np.flatnonzero(eligible)
    if eligible.size < count:
        raise ValueError(
            f"anchor {anchor_index}: only {eligible.size} samples beyond d_th={d_th} m, need {count}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.choice(eligible, size=count, replace=False)


@dataclass
class ContrastiveBatch:
    anchors: np.ndarray  # (A,)
    positives: np.ndarray  # (A, |P_a|)
    negatives: np.ndarray  # (A, |N_a|)

    def __len__(self) -> int:
        return self.anchors.shape[0]

    def all_indices(self) -> np.ndarray:
        return np.unique(np.concatenate([self.anchors, self.positives.ravel(), self.negatives.ravel()]))


def iterate_batches(
    train: FingerprintDatabase,
    batch_size: int,
    num_positives: int,
    num_negatives: int,
    d_th: float,
    epoch_seed,
    positives: np.ndarray | None = None,
) -> Iterator[ContrastiveBatch]:
    """Yield one epoch of contrastive batches over a seeded permutation of the training set.

    The last partial batch is kept. ``positives`` may carry a precomputed
    :func:`positive_table`.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if positives is None:
        positives = positive_table(train, num_positives)
    rng = np.random.default_rng(epoch_seed)
    order = rng.permutation(len(train))
    for start in range(0, len(order), batch_size):
        anchors = order[start : start + batch_size]
        pos = positives[anchors]
        neg = np.stack(
            [sample_negatives(train, a, num_negatives, d_th, rng, exclude=p) for a, p in zip(anchors, pos)]
        )
        yield ContrastiveBatch(anchors, pos, neg)
