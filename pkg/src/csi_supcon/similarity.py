"""CSI similarity metrics: learned embedding distance plus three hand-crafted baselines.

Each metric exists twice: a scalar pair function (the reference) and a
vectorized ``SimilarityMetric.matrix`` used for kNN over whole databases.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .encoder import CsiEncoder, embed_csi

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-9
METRIC_NAMES = ("supcon", "cmd", "svd", "magnitude")


class DegenerateSingularVectorWarning(RuntimeWarning):
    """Top two singular values tie, so the dominant singular vector is ill-defined."""


def _check_pair(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def supcon_similarity(z_i, z_j, eps: float = DEFAULT_EPS) -> float:
    z_i, z_j = _check_pair(z_i, z_j)
    return 1.0 / max(float(np.linalg.norm(z_i - z_j)), eps)


def cmd_similarity(H_i, H_j) -> float:
    """Normalized trace inner product of the two spatial autocorrelation matrices."""
    H_i, H_j = _check_pair(H_i, H_j)
    C_i = H_i @ H_i.conj().T
    C_j = H_j @ H_j.conj().T
    n_i, n_j = np.linalg.norm(C_i), np.linalg.norm(C_j)
    if n_i == 0 or n_j == 0:
        raise ValueError("CMD similarity undefined for an all-zero channel")
    return float(np.real(np.trace(C_i @ C_j))) / (n_i * n_j)


def dominant_left_singular_vector(H, tie_rtol: float = 1e-10) -> np.ndarray:
    H = np.asarray(H)
    if not np.any(H):
        raise ValueError("dominant singular vector undefined for an all-zero channel")
    U, s, _ = np.linalg.svd(H, full_matrices=False)
    if s.size > 1 and s[0] - s[1] <= tie_rtol * s[0]:
        warnings.warn("top singular values tie; dominant singular vector is not unique", DegenerateSingularVectorWarning)
    return U[:, 0]


def svd_similarity(H_i, H_j) -> float:
    """``|v_i^H v_j|`` for the dominant left singular vectors."""
    H_i, H_j = _check_pair(H_i, H_j)
    v_i = dominant_left_singular_vector(H_i)
    v_j = dominant_left_singular_vector(H_j)
    return min(float(np.abs(np.vdot(v_i, v_j))), 1.0)


def magnitude_similarity(H_i, H_j, eps: float = DEFAULT_EPS) -> float:
    H_i, H_j = _check_pair(H_i, H_j)
    d = float(np.sum((np.abs(H_i) - np.abs(H_j)) ** 2))
    return 1.0 / max(d, eps)


@dataclass
class SimilarityMetric:
    """A named metric; ``supcon`` additionally needs a trained encoder."""

    kind: str
    encoder: CsiEncoder | None = None
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.kind not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.kind!r}; choose from {METRIC_NAMES}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.kind == "supcon" and self.encoder is None:
            raise ValueError("the supcon metric needs an encoder")

    def features(self, csi) -> np.ndarray:
        """Per-sample features the vectorized similarity works on."""
        csi = np.asarray(csi)
        if csi.ndim == 2:
            csi = csi[None]
        if csi.shape[0] == 0:
            raise ValueError("no samples")
        H = csi.astype(np.complex128)
        if self.kind == "supcon":
            return embed_csi(self.encoder, csi)
        if self.kind == "cmd":
            C = H @ np.conj(np.swapaxes(H, 1, 2))
            norms = np.linalg.norm(C.reshape(len(C), -1), axis=1)
            if np.any(norms == 0):
                raise ValueError("CMD similarity undefined for an all-zero channel")
            return C.reshape(len(C), -1) / norms[:, None]
        if self.kind == "svd":
            return np.stack([dominant_left_singular_vector(h) for h in H])
        return np.abs(H).reshape(len(H), -1)

    def matrix(self, query_features, fingerprint_features) -> np.ndarray:
        """(Q, I) similarities between query and fingerprint features."""
        q = np.asarray(query_features)
        f = np.asarray(fingerprint_features)
        if self.kind == "cmd":
            # Tr(C_q C_i) = sum conj(C_q) * C_i for Hermitian C_q
            return np.clip(np.real(np.conj(q) @ f.T), 0.0, 1.0)
        if self.kind == "svd":
            return np.clip(np.abs(np.conj(q) @ f.T), 0.0, 1.0)
        d = np.sqrt(np.maximum(_sq_dists(q, f), 0.0))
        if self.kind == "supcon":
            return 1.0 / np.maximum(d, self.eps)
        return 1.0 / np.maximum(d**2, self.eps)

    def pair(self, a, b) -> float:
        """Scalar reference: embeddings for ``supcon``, CSI matrices otherwise."""
        if self.kind == "supcon":
            return supcon_similarity(a, b, self.eps)
        if self.kind == "cmd":
            return cmd_similarity(a, b)
        if self.kind == "svd":
            return svd_similarity(a, b)
        return magnitude_similarity(a, b, self.eps)


def _sq_dists(q: np.ndarray, f: np.ndarray) -> np.ndarray:
    # blockwise exact differences; the |a|^2 + |b|^2 - 2ab expansion loses small distances
    out = np.empty((q.shape[0], f.shape[0]))
    step = max(1, int(2**22 // max(1, f.size)))
    for s in range(0, q.shape[0], step):
        diff = q[s : s + step, None, :] - f[None, :, :]
        out[s : s + step] = np.einsum("qir,qir->qi", diff, diff)
    return out


@dataclass
class FingerprintIndex:
    """Fingerprint features (e.g. embeddings z_i) paired with positions p_i."""

    metric: SimilarityMetric
    features: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)


def build_fingerprint_index(db, metric: SimilarityMetric | CsiEncoder) -> FingerprintIndex:
    """Order-preserving feature database; passing an encoder builds the learned {z_i, p_i} index."""
    if isinstance(metric, CsiEncoder):
        metric = SimilarityMetric("supcon", metric)
    if len(db) == 0:
        raise ValueError("empty database")
    return FingerprintIndex(metric, metric.features(db.csi), np.asarray(db.positions, dtype=np.float64))
