"""Multi-positive contrastive loss, its anchor gradient, and the direct-mapping loss.

The numpy functions are the reference implementations; ``supcon_loss_torch``
and ``dm_loss_torch`` are the differentiable versions used for training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass
class LossInputs:
    anchor: np.ndarray  # (R,)
    positives: np.ndarray  # (|P_a|, R)
    negatives: np.ndarray  # (|N_a|, R)
    tau: float = 1.5

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=np.float64)
        self.positives = np.atleast_2d(np.asarray(self.positives, dtype=np.float64))
        self.negatives = np.atleast_2d(np.asarray(self.negatives, dtype=np.float64))
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        R = self.anchor.shape[-1]
        if self.anchor.ndim != 1 or self.positives.shape[1] != R or self.negatives.shape[1] != R:
            raise ValueError("anchor, positive and negative embeddings must share one dimension")
        if self.positives.shape[0] < 1 or self.negatives.shape[0] < 1:
            raise ValueError("need at least one positive and one negative")


def _logits(inp: LossInputs) -> np.ndarray:
    others = np.concatenate([inp.positives, inp.negatives])
    return others @ inp.anchor / inp.tau


def _softmax_weights(inp: LossInputs) -> np.ndarray:
    s = _logits(inp)
    e = np.exp(s - s.max())
    return e / e.sum()


def anchor_loss(inp: LossInputs) -> float:
    """Loss term of one anchor: ``-sum_p log softmax(z_a . z_j / tau)[p]`` over positives."""
    s = _logits(inp)
    P = inp.positives.shape[0]
    # per positive: log sum_j exp(s_j - s_p); log1p form keeps full precision near zero loss
    d = s[None, :] - s[:P, None]
    np.fill_diagonal(d[:, :P], -np.inf)
    m = np.maximum(d.max(axis=1), 0.0)
    rest = np.sum(np.exp(d - m[:, None]), axis=1)
    terms = np.where(m > 0, m + np.log(np.exp(-m) + rest), np.log1p(rest))
    return float(np.sum(terms))


def supcon_loss(batch) -> float:
    """Mean of :func:`anchor_loss` over the anchors of a mini-batch."""
    batch = [batch] if isinstance(batch, LossInputs) else list(batch)
    if not batch:
        raise ValueError("empty batch")
    return float(np.mean([anchor_loss(b) for b in batch]))


def supcon_grad_anchor(inp: LossInputs) -> np.ndarray:
    """Closed-form gradient of :func:`anchor_loss` with respect to the anchor embedding."""
    P = inp.positives.shape[0]
    x = _softmax_weights(inp)
    x_p, x_n = x[:P], x[P:]
    inner = -((1.0 / P - x_p) @ inp.positives) + x_n @ inp.negatives
    return (P / inp.tau) * inner


def supcon_loss_torch(z_a: torch.Tensor, z_p: torch.Tensor, z_n: torch.Tensor, tau: float) -> torch.Tensor:
    """Batched loss: ``z_a`` (A, R), ``z_p`` (A, P, R), ``z_n`` (A, N, R)."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if not (z_a.shape[-1] == z_p.shape[-1] == z_n.shape[-1]):
        raise ValueError("embedding dimensions differ")
    others = torch.cat([z_p, z_n], dim=1)
    logits = torch.einsum("ar,ajr->aj", z_a, others) / tau
    log_z = torch.logsumexp(logits, dim=1, keepdim=True)
    P = z_p.shape[1]
    per_anchor = -(logits[:, :P] - log_z).sum(dim=1)
    return per_anchor.mean()


def dm_loss(z, p) -> float:
    """Mean Euclidean distance between predicted and true 2-D positions."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    if z.shape != p.shape or z.shape[1] != 2:
        raise ValueError(f"expected matching (A, 2) arrays, got {z.shape} and {p.shape}")
    return float(np.mean(np.linalg.norm(z - p, axis=1)))


def dm_loss_torch(z: torch.Tensor, p: torch.Tensor) -> torch.Tensor:
    if z.shape != p.shape or z.shape[-1] != 2:
        raise ValueError(f"expected matching (A, 2) tensors, got {tuple(z.shape)} and {tuple(p.shape)}")
    return torch.linalg.vector_norm(z - p, dim=1).mean()
