"""Fixed CSI preprocessing: spatial autocorrelation packed into one real B x B matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PreprocessedInput:
    R_matrix: np.ndarray  # (B, B) real, entries in [-1, 1]
    norm_factor: float


def autocorrelate(H) -> np.ndarray:
    """C = H H^dagger over subcarriers (works on a single B x N matrix or an (I, B, N) stack)."""
    H = np.asarray(H)
    if H.ndim < 2 or H.shape[-1] < 1 or H.shape[-2] < 1:
        raise ValueError(f"H must be B x N with B, N >= 1, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("H contains non-finite entries")
    H = H.astype(np.complex128, copy=False)
    return H @ np.conj(np.swapaxes(H, -1, -2))


def pack(C, hermitian_rtol: float = 1e-6) -> PreprocessedInput:
    """Real part above the diagonal, imaginary part below it, real diagonal; scaled by ||C||_F."""
    C = np.asarray(C, dtype=np.complex128)
    norm = float(np.linalg.norm(C))
    if norm == 0.0:
        raise ValueError("autocorrelation is all zero")
    if np.max(np.abs(C - C.conj().T)) > hermitian_rtol * norm:
        raise ValueError("C is not Hermitian")
    R = np.triu(C.real, 1) + np.tril(C.imag, -1) + np.diag(np.diag(C).real)
    return PreprocessedInput(R / norm, norm)


def preprocess(H) -> PreprocessedInput:
    return pack(autocorrelate(H))


def preprocess_batch(csi) -> np.ndarray:
    """Vectorized :func:`preprocess` over an (I, B, N) stack, returning (I, B, B) float64."""
    C = autocorrelate(csi)
    norms = np.linalg.norm(C.reshape(C.shape[0], -1), axis=1)
    if np.any(norms == 0.0):
        raise ValueError(f"all-zero CSI at sample(s) {np.flatnonzero(norms == 0.0).tolist()}")
    B = C.shape[-1]
    upper = np.triu(np.ones((B, B), dtype=bool), 1)
    lower = upper.T
    R = np.where(upper, C.real, np.where(lower, C.imag, 0.0))
    idx = np.arange(B)
    R[:, idx, idx] = C[:, idx, idx].real
    return R / norms[:, None, None]


def unpack(R_matrix, norm_factor: float = 1.0) -> np.ndarray:
    """Rebuild the Hermitian C from its packed form."""
    R = np.asarray(R_matrix, dtype=np.float64) * norm_factor
    re = np.triu(R, 1)
    im = np.tril(R, -1)
    C = re + re.T + 1j * (im - im.T)
    return C + np.diag(np.diag(R))
