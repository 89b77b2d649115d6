"""Weighted kNN and direct-mapping position prediction, plus error statistics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .encoder import CsiEncoder, embed_csi
from .similarity import FingerprintIndex


def wknn_from_similarities(similarities, positions, k: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Similarity-weighted mean of the k most similar fingerprints.

    Returns ``(position, neighbor_indices)``; ties in similarity go to the
    smaller fingerprint index.
    """
    s = np.asarray(similarities, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty fingerprint database")
    if not 1 <= k <= s.size:
        raise ValueError(f"k={k} must lie in [1, {s.size}]")
    nbrs = np.argsort(-s, kind="stable")[:k]
    w = s[nbrs]
    if not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError(f"invalid kNN weights {w}")
    return (w @ positions[nbrs]) / w.sum(), nbrs


def predict_wknn(query_csi, index: FingerprintIndex, k: int = 4, return_neighbors: bool = False):
    """Positions for one (B, N) query or a (Q, B, N) stack against a fingerprint index."""
    query_csi = np.asarray(query_csi)
    pos, nbrs = predict_wknn_from_features(index.metric.features(query_csi), index, k)
    if query_csi.ndim == 2:
        pos, nbrs = pos[0], nbrs[0]
    return (pos, nbrs) if return_neighbors else pos


def predict_wknn_from_features(query_features, index: FingerprintIndex, k: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`predict_wknn` for queries already mapped to metric features (e.g. embeddings)."""
    S = index.metric.matrix(np.atleast_2d(query_features), index.features)
    out = [wknn_from_similarities(row, index.positions, k) for row in S]
    return np.stack([p for p, _ in out]), np.stack([n for _, n in out])


def predict_dm(query_csi, dm_model: CsiEncoder) -> np.ndarray:
    """Eval-mode output of a direct-mapping encoder, read as (x, y) in meters."""
    if dm_model.config.feature_dim != 2:
        raise ValueError(f"direct-mapping encoder must output 2 values, has {dm_model.config.feature_dim}")
    query_csi = np.asarray(query_csi)
    out = embed_csi(dm_model, query_csi)
    return out[0] if query_csi.ndim == 2 else out


@dataclass
class EvaluationReport:
    errors: np.ndarray
    thresholds: tuple[float, ...] = (25.0,)
    predictions: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def median(self) -> float:
        return float(np.median(self.errors))

    @property
    def sorted_errors(self) -> np.ndarray:
        return np.sort(self.errors)

    def fraction_below(self, threshold: float) -> float:
        return float(np.mean(self.errors < threshold))

    def summary(self) -> dict:
        return {
            "num_samples": int(self.errors.size),
            "mean_error_m": self.mean,
            "median_error_m": self.median,
            "fraction_below": {str(t): self.fraction_below(t) for t in self.thresholds},
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["sample_index", "error_m"])
            for i, e in enumerate(self.errors):
                w.writerow([i, repr(float(e))])


def evaluate(test_db, predictor: Callable[[np.ndarray], np.ndarray], thresholds=(25.0,)) -> EvaluationReport:
    """Per-sample Euclidean errors of ``predictor(test_db.csi)`` against the true positions."""
    if len(test_db) == 0:
        raise ValueError("empty test set")
    pred = np.asarray(predictor(test_db.csi), dtype=np.float64).reshape(len(test_db), 2)
    errors = np.linalg.norm(pred - test_db.positions, axis=1)
    return EvaluationReport(errors, tuple(float(t) for t in thresholds), pred)
