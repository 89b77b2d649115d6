"""Spatially consistent synthetic MIMO-OFDM channel generator.

Every path is summed with its exact per-antenna propagation delay (near
field, no plane-wave approximation), so the channel varies continuously
with the transmitter position and needs no knowledge of the array layout
downstream.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class DegenerateGeometryError(ValueError):
    """A transmitter sits exactly on a scatterer or an antenna element."""


@dataclass
class ArrayGeometry:
    elements: np.ndarray  # (B, 3) meters
    calibration_gains: np.ndarray  # (B,) complex

    def __post_init__(self):
        self.elements = np.atleast_2d(np.asarray(self.elements, dtype=np.float64))
        self.calibration_gains = np.asarray(self.calibration_gains, dtype=np.complex128).reshape(-1)
        if self.elements.shape[0] < 1 or self.elements.shape[1] != 3:
            raise ValueError(f"elements must have shape (B, 3), got {self.elements.shape}")
        if not np.all(np.isfinite(self.elements)):
            raise ValueError("element coordinates must be finite")
        if self.calibration_gains.shape[0] != self.elements.shape[0]:
            raise ValueError("calibration_gains must have one entry per element")
        if np.any(np.abs(self.calibration_gains) <= 0):
            raise ValueError("calibration gain magnitudes must be > 0")

    @property
    def num_antennas(self) -> int:
        return self.elements.shape[0]

    def to_dict(self) -> dict:
        return {
            "elements": self.elements.tolist(),
            "calibration_gains": [[g.real, g.imag] for g in self.calibration_gains],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        gains = np.asarray(d["calibration_gains"], dtype=np.float64)
        return cls(np.asarray(d["elements"]), gains[:, 0] + 1j * gains[:, 1])


@dataclass
class Scatterer:
    position: np.ndarray  # (3,) meters
    gain: complex

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.gain = complex(self.gain)


@dataclass
class ChannelScenario:
    """Propagation environment seen by the base station.

    ``path_loss_exponent`` scales each path amplitude by
    ``(1 / path_length) ** path_loss_exponent``; 0 gives pure phase rays.
    """

    bs_array: ArrayGeometry
    scatterers: list[Scatterer] = field(default_factory=list)
    los_enabled: bool = True
    los_gain: complex = 1.0
    carrier_frequency: float = 1.27e9
    subcarrier_spacing: float = 312.5e3
    num_subcarriers: int = 64
    snr_db: float | None = 10.0
    per_sample_sto: bool = True
    per_sample_cfo: bool = True
    max_sto: float = 0.05
    path_loss_exponent: float = 1.0
    ue_height: float = 1.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        if not self.los_enabled and not self.scatterers:
            raise ValueError("scenario needs at least one propagation path")
        if self.carrier_frequency <= 0 or self.subcarrier_spacing < 0:
            raise ValueError("frequencies must be positive")

    @property
    def num_antennas(self) -> int:
        return self.bs_array.num_antennas

    def subcarrier_frequencies(self) -> np.ndarray:
        n = np.arange(self.num_subcarriers)
        return self.carrier_frequency + (n - self.num_subcarriers / 2) * self.subcarrier_spacing

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("bs_array", "scatterers", "los_gain")}
        d["bs_array"] = self.bs_array.to_dict()
        d["scatterers"] = [
            {"position": s.position.tolist(), "gain": [s.gain.real, s.gain.imag]} for s in self.scatterers
        ]
        d["los_gain"] = [complex(self.los_gain).real, complex(self.los_gain).imag]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelScenario":
        d = dict(d)
        if "preset" in d:
            preset = d.pop("preset")
            if preset != "default":
                raise ValueError(f"unknown scenario preset {preset!r}")
            return default_scenario(**d)
        d["bs_array"] = ArrayGeometry.from_dict(d["bs_array"])
        d["scatterers"] = [Scatterer(s["position"], complex(*s["gain"])) for s in d.get("scatterers", [])]
        if "los_gain" in d:
            d["los_gain"] = complex(*d["los_gain"])
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "ChannelScenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ChannelRealization:
    H: np.ndarray  # (B, N) complex, what the receiver estimates
    H_o: np.ndarray  # (B, N) complex, noiseless
    position: np.ndarray  # (2,) meters

    @property
    def H_e(self) -> np.ndarray:
        return self.H - self.H_o


def planar_array(rows: int, cols: int, spacing: float, center=(0.0, 0.0, 10.0)) -> np.ndarray:
    """Element coordinates of a vertical rows x cols grid in the x-z plane, facing +y."""
    x = (np.arange(cols) - (cols - 1) / 2) * spacing
    z = (np.arange(rows) - (rows - 1) / 2) * spacing
    xx, zz = np.meshgrid(x, z)
    pts = np.stack([xx.ravel(), np.zeros(xx.size), zz.ravel()], axis=1)
    return pts + np.asarray(center, dtype=np.float64)


DEFAULT_AREA = ((-100.0, 100.0), (20.0, 220.0))


def default_scenario(
    rng_seed: int = 0,
    rows: int = 4,
    cols: int = 4,
    num_subcarriers: int = 64,
    num_scatterers: int = 20,
    snr_db: float | None = 10.0,
    carrier_frequency: float = 1.27e9,
    subcarrier_spacing: float = 312.5e3,
    area=DEFAULT_AREA,
    **overrides,
) -> ChannelScenario:
    """Desk-scale scenario: half-wavelength planar array at the edge of a 200 m x 200 m area.

    Scatterers are dropped uniformly over a box slightly larger than the
    area, and every element gets a random unit-magnitude calibration phase.
    """
    rng = np.random.default_rng(rng_seed)
    wavelength = SPEED_OF_LIGHT / carrier_frequency
    elements = planar_array(rows, cols, wavelength / 2)
    cal = np.exp(1j * rng.uniform(0, 2 * np.pi, elements.shape[0]))
    (x0, x1), (y0, y1) = area
    margin = 0.25 * max(x1 - x0, y1 - y0)
    scatterers = []
    for _ in range(num_scatterers):
        pos = [rng.uniform(x0 - margin, x1 + margin), rng.uniform(y0, y1 + margin), rng.uniform(3.0, 30.0)]
        gain = rng.uniform(0.3, 1.0) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        scatterers.append(Scatterer(pos, gain))
    return ChannelScenario(
        bs_array=ArrayGeometry(elements, cal),
        scatterers=scatterers,
        carrier_frequency=carrier_frequency,
        subcarrier_spacing=subcarrier_spacing,
        num_subcarriers=num_subcarriers,
        snr_db=snr_db,
        rng_seed=rng_seed,
        **overrides,
    )


def sample_positions(count: int, area=DEFAULT_AREA, seed: int = 0) -> np.ndarray:
    """Uniform random 2-D positions inside ``area = ((xmin, xmax), (ymin, ymax))``."""
    rng = np.random.default_rng(seed)
    (x0, x1), (y0, y1) = area
    return np.stack([rng.uniform(x0, x1, count), rng.uniform(y0, y1, count)], axis=1)


def _ue_point(scenario: ChannelScenario, position) -> np.ndarray:
    p = np.asarray(position, dtype=np.float64).reshape(-1)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise ValueError(f"position must be a finite 2-D point, got {position!r}")
    return np.array([p[0], p[1], scenario.ue_height])


def ray_sum(scenario: ChannelScenario, position) -> np.ndarray:
    """Noiseless, impairment-free channel G(p): a pure function of the position."""
    ue = _ue_point(scenario, position)
    ant = scenario.bs_array.elements
    freqs = scenario.subcarrier_frequencies()

    path_lengths = []  # each (B,)
    gains = []
    if scenario.los_enabled:
        path_lengths.append(np.linalg.norm(ant - ue, axis=1))
        gains.append(complex(scenario.los_gain))
    for s in scenario.scatterers:
        d_in = np.linalg.norm(ue - s.position)
        if d_in == 0.0:
            raise DegenerateGeometryError(f"position {position!r} coincides with a scatterer")
        path_lengths.append(d_in + np.linalg.norm(s.position - ant, axis=1))
        gains.append(s.gain)
    lengths = np.stack(path_lengths)  # (L, B)
    if np.any(lengths == 0.0):
        raise DegenerateGeometryError(f"position {position!r} coincides with an antenna element")

    amp = np.asarray(gains)[:, None] * lengths ** (-scenario.path_loss_exponent)  # (L, B)
    delays = lengths / SPEED_OF_LIGHT
    phase = np.exp(-2j * np.pi * delays[:, :, None] * freqs[None, None, :])  # (L, B, N)
    H = np.einsum("lb,lbn->bn", amp, phase)
    return H * scenario.bs_array.calibration_gains[:, None]


def generate_channel(scenario: ChannelScenario, position, noise_seed: int) -> ChannelRealization:
    """Draw one CSI measurement at ``position``.

    Per-sample timing offset (linear phase over subcarriers) and frequency
    offset (common phase) are folded into the noiseless matrix ``H_o``; the
    estimation error is i.i.d. circular complex Gaussian scaled to the
    configured SNR relative to ``||H_o||_F^2``.
    """
    H_o = ray_sum(scenario, position)
    B, N = H_o.shape
    rng = np.random.default_rng(noise_seed)
    if scenario.per_sample_sto:
        delta = rng.uniform(-scenario.max_sto, scenario.max_sto)
        H_o = H_o * np.exp(-2j * np.pi * np.arange(N) * delta)[None, :]
    if scenario.per_sample_cfo:
        H_o = H_o * np.exp(1j * rng.uniform(0, 2 * np.pi))
    if scenario.snr_db is None:
        H = H_o.copy()
    else:
        noise_var = np.sum(np.abs(H_o) ** 2) / (B * N) / 10 ** (scenario.snr_db / 10)
        noise = rng.standard_normal((B, N)) + 1j * rng.standard_normal((B, N))
        H = H_o + np.sqrt(noise_var / 2) * noise
    return ChannelRealization(H=H, H_o=H_o, position=np.asarray(position, dtype=np.float64).reshape(2))


def sample_noise_seed(rng_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([rng_seed, index]).generate_state(1)[0])


def generate_dataset(scenario: ChannelScenario, positions):
    """One realization per position, in order, as a :class:`FingerprintDatabase`."""
    from .dataset import FingerprintDatabase

    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[0] == 0 or positions.shape[1] != 2:
        raise ValueError("positions must be a non-empty (I, 2) array")
    csi = np.empty((positions.shape[0], scenario.num_antennas, scenario.num_subcarriers), dtype=np.complex64)
    for i, p in enumerate(positions):
        csi[i] = generate_channel(scenario, p, sample_noise_seed(scenario.rng_seed, i)).H
    return FingerprintDatabase(csi, positions, source="synthetic")
