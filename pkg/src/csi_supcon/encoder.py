"""Convolutional CSI encoder: packed autocorrelation in, R-dimensional embedding out."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .preprocess import PreprocessedInput

PARAMS_MAGIC = b"CSIENC\x00\x01"
PARAMS_VERSION = 1

# (kernel, stride, padding) for the four conv layers
CONV_LAYOUT = ((5, 2, 1), (3, 1, 1), (3, 1, 1), (3, 1, 0))


@dataclass
class EncoderConfig:
    input_size: int = 56
    channels: tuple[int, ...] = (16, 32, 32, 32)
    bn_after_layers: tuple[int, ...] = (2, 3)  # 1-based conv layer numbers
    projection_hidden: int = 512
    feature_dim: int = 32
    output_normalized: bool = False
    conv_layout: tuple[tuple[int, int, int], ...] = field(default=CONV_LAYOUT)

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.bn_after_layers = tuple(int(i) for i in self.bn_after_layers)
        self.conv_layout = tuple(tuple(int(v) for v in layer) for layer in self.conv_layout)
        if len(self.channels) != len(self.conv_layout):
            raise ValueError("one channel width per conv layer is required")
        if any(not 1 <= i <= len(self.channels) for i in self.bn_after_layers):
            raise ValueError(f"bn_after_layers out of range: {self.bn_after_layers}")
        if self.feature_dim < 2:
            raise ValueError("feature_dim must be >= 2")
        conv_output_shape(self.input_size, self)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


def conv_output_shape(input_size: int, config: EncoderConfig | None = None) -> tuple[int, int, int]:
    """(channels, height, width) after the conv stack for a B x B input."""
    layout = CONV_LAYOUT if config is None else config.conv_layout
    channels = (16, 32, 32, 32) if config is None else config.channels
    size = int(input_size)
    if size < 1:
        raise ValueError(f"input size must be positive, got {input_size}")
    for i, (k, s, p) in enumerate(layout, start=1):
        if size + 2 * p < k:
            raise ValueError(f"input size {input_size} too small: conv layer {i} sees {size} (+{2 * p} padding) < kernel {k}")
        size = (size + 2 * p - k) // s + 1
    return channels[-1], size, size


class NonFiniteActivationError(FloatingPointError):
    pass


class CsiEncoder(nn.Module):
    """Four Tanh conv layers (BN after the configured ones), flatten, dense-Tanh-dense head.

    ``output_shift``/``output_scale`` are a fixed affine map on the head
    output; they stay at identity except for direct-mapping encoders, where
    they carry the training-position normalization.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        layers = []
        in_ch = 1
        for i, ((k, s, p), out_ch) in enumerate(zip(config.conv_layout, config.channels), start=1):
            layers.append(nn.Conv2d(in_ch, out_ch, kernel_size=k, stride=s, padding=p))
            if i in config.bn_after_layers:
                layers.append(nn.BatchNorm2d(out_ch))
            layers.append(nn.Tanh())
            in_ch = out_ch
        self.conv = nn.Sequential(*layers)
        c, h, w = conv_output_shape(config.input_size, config)
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(c * h * w, config.projection_hidden),
            nn.Tanh(),
            nn.Linear(config.projection_hidden, config.feature_dim),
        )
        self.register_buffer("output_shift", torch.zeros(config.feature_dim))
        self.register_buffer("output_scale", torch.ones(()))
        self.reset_parameters()

    def reset_parameters(self) -> None:
        # LeCun-uniform (variance 1/fan_in), zero biases
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                fan_in = m.weight[0].numel()
                bound = math.sqrt(3.0 / fan_in)
                nn.init.uniform_(m.weight, -bound, bound)
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor, check_finite: bool = False) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(1)
        B = self.config.input_size
        if x.shape[1:] != (1, B, B):
            raise ValueError(f"expected inputs of shape (*, {B}, {B}), got {tuple(x.shape)}")
        for name, module in [*self.conv.named_children(), *self.head.named_children()]:
            x = module(x)
            if check_finite and not torch.isfinite(x).all():
                raise NonFiniteActivationError(f"non-finite activation after layer {name} ({module})")
        z = x * self.output_scale + self.output_shift
        if self.config.output_normalized:
            z = nn.functional.normalize(z, dim=1)
        return z


def _as_input_array(inputs) -> np.ndarray:
    if isinstance(inputs, PreprocessedInput):
        return inputs.R_matrix[None]
    if isinstance(inputs, (list, tuple)):
        if len(inputs) == 0:
            raise ValueError("empty batch")
        return np.stack([x.R_matrix if isinstance(x, PreprocessedInput) else np.asarray(x) for x in inputs])
    arr = np.asarray(inputs)
    return arr[None] if arr.ndim == 2 else arr


def forward_batch(model: CsiEncoder, inputs, mode: str = "eval") -> np.ndarray:
    """Embed a batch of packed inputs; returns an (n, R) float64 array.

    ``mode="train"`` uses batch statistics and updates BN running averages.
    """
    x = _as_input_array(inputs)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    dtype = next(model.parameters()).dtype
    was_training = model.training
    model.train(mode == "train")
    try:
        with torch.no_grad():
            z = model(torch.as_tensor(x, dtype=dtype), check_finite=True)
    finally:
        model.train(was_training)
    return z.double().numpy()


def forward(model: CsiEncoder, inp, mode: str = "eval") -> np.ndarray:
    """Embed one packed input."""
    return forward_batch(model, inp, mode)[0]


def embed_csi(model: CsiEncoder, csi, batch_size: int = 512) -> np.ndarray:
    """Eval-mode embeddings for an (I, B, N) CSI stack."""
    from .preprocess import preprocess_batch

    csi = np.asarray(csi)
    if csi.ndim == 2:
        csi = csi[None]
    if csi.shape[0] == 0:
        raise ValueError("no CSI samples to embed")
    out = [forward_batch(model, preprocess_batch(csi[i : i + batch_size])) for i in range(0, len(csi), batch_size)]
    return np.concatenate(out)


def _param_tensors(model: CsiEncoder) -> dict[str, torch.Tensor]:
    return {k: v for k, v in model.state_dict().items() if not k.endswith("num_batches_tracked")}


def save_params(model: CsiEncoder, path) -> Path:
    """Write magic, a length-prefixed JSON manifest, then raw little-endian float32 tensors."""
    path = Path(path)
    tensors = _param_tensors(model)
    manifest = {
        "version": PARAMS_VERSION,
        "config": model.config.to_dict(),
        "dtype": "<f4",
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in tensors.items()],
    }
    header = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for v in tensors.values():
            f.write(v.detach().cpu().numpy().astype("<f4").tobytes(order="C"))
    return path


def load_params(path, expected_config: EncoderConfig | None = None) -> CsiEncoder:
    data = Path(path).read_bytes()
    if data[: len(PARAMS_MAGIC)] != PARAMS_MAGIC:
        raise ValueError(f"{path}: not an encoder parameter file")
    off = len(PARAMS_MAGIC)
    if len(data) < off + 8:
        raise ValueError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<Q", data[off : off + 8])
    off += 8
    try:
        manifest = json.loads(data[off : off + hlen])
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ValueError(f"{path}: corrupt manifest") from e
    off += hlen
    if manifest.get("version") != PARAMS_VERSION:
        raise ValueError(f"{path}: unsupported parameter version {manifest.get('version')!r}")
    config = EncoderConfig.from_dict(manifest["config"])
    if expected_config is not None and config != expected_config:
        raise ValueError(f"{path}: stored config {config} does not match expected {expected_config}")
    model = CsiEncoder(config)
    own = _param_tensors(model)
    if [t["name"] for t in manifest["tensors"]] != list(own):
        raise ValueError(f"{path}: tensor names do not match the encoder layout")
    state = {}
    for t in manifest["tensors"]:
        shape = tuple(t["shape"])
        if shape != tuple(own[t["name"]].shape):
            raise ValueError(f"{path}: tensor {t['name']} has shape {shape}, expected {tuple(own[t['name']].shape)}")
        n = int(np.prod(shape, dtype=np.int64)) * 4
        if off + n > len(data):
            raise ValueError(f"{path}: truncated payload at tensor {t['name']}")
        arr = np.frombuffer(data[off : off + n], dtype="<f4").reshape(shape)
        state[t["name"]] = torch.from_numpy(arr.copy())
        off += n
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    model.load_state_dict(state, strict=False)
    model.eval()
    return model
