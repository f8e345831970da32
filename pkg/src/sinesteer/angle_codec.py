"""Steering-angle codecs for classification-style output layers.

Two encodings live here:

* the phase-shift sine code, where an angle becomes the phase of one period
  of a sine wave sampled across ``n_neurons`` outputs, decoded by a closed-form
  least-squares fit;
* plain uniform bins (optionally Gaussian-smoothed) with an expected-value
  decoder, used by the softmax baseline head.

All functions are pure. Angles are in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtr

from .errors import (
    AngleOutOfRange,
    DegenerateWave,
    InvalidConfig,
    InvalidDistribution,
    PhaseOutOfRange,
)

DEFAULT_N_NEURONS = 95
DEFAULT_PHI_MAX = 190.0
DEFAULT_SMOOTHING_VARIANCE = 80.0

AMPLITUDE_FLOOR = 1e-6
_PHASE_SLACK = 1e-9


@dataclass(frozen=True)
class CodecConfig:
    n_neurons: int = DEFAULT_N_NEURONS
    phi_max: float = DEFAULT_PHI_MAX

    def __post_init__(self):
        if int(self.n_neurons) != self.n_neurons or self.n_neurons < 4:
            raise InvalidConfig(f"n_neurons must be an integer >= 4, got {self.n_neurons!r}")
        if not (self.phi_max > 0 and math.isfinite(self.phi_max)):
            raise InvalidConfig(f"phi_max must be finite and > 0, got {self.phi_max!r}")
        object.__setattr__(self, "n_neurons", int(self.n_neurons))
        object.__setattr__(self, "phi_max", float(self.phi_max))

    @cached_property
    def carrier_phases(self) -> np.ndarray:
        """Per-neuron carrier phase 2*pi*(i-1)/(N-1) for 1-based neuron i."""
        i = np.arange(1, self.n_neurons + 1, dtype=np.float64)
        return 2.0 * np.pi * (i - 1.0) / (self.n_neurons - 1.0)

    @property
    def bin_width(self) -> float:
        return 2.0 * self.phi_max / self.n_neurons

    @cached_property
    def bin_edges(self) -> np.ndarray:
        return -self.phi_max + self.bin_width * np.arange(self.n_neurons + 1, dtype=np.float64)

    @cached_property
    def bin_centers(self) -> np.ndarray:
        edges = self.bin_edges
        return 0.5 * (edges[:-1] + edges[1:])


@dataclass(frozen=True)
class DecodeResult:
    angle: float
    amplitude: float
    residual_rmse: float


def _check_angle(angle: float, config: CodecConfig) -> float:
    angle = float(angle)
    if not abs(angle) <= config.phi_max:
        raise AngleOutOfRange(f"angle {angle!r} outside [-{config.phi_max}, {config.phi_max}]")
    return angle


def angle_to_phase(angle, config: CodecConfig):
    return np.asarray(angle, dtype=np.float64) * np.pi / (2.0 * config.phi_max)


def phase_to_angle(phase, config: CodecConfig):
    return 2.0 * config.phi_max * np.asarray(phase, dtype=np.float64) / np.pi


def encode(angle: float, config: CodecConfig = CodecConfig()) -> np.ndarray:
    """Encode ``angle`` as ``sin(carrier_i - angle*pi/(2*phi_max))`` over all neurons."""
    angle = _check_angle(angle, config)
    return np.sin(config.carrier_phases - float(angle_to_phase(angle, config)))


def encode_many(angles, config: CodecConfig = CodecConfig()) -> np.ndarray:
    """Vectorised :func:`encode`; returns shape ``(len(angles), n_neurons)``."""
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    bad = ~(np.abs(angles) <= config.phi_max)
    if bad.any():
        raise AngleOutOfRange(f"angle {angles[bad][0]!r} outside +-{config.phi_max}")
    return np.sin(config.carrier_phases[None, :] - angle_to_phase(angles, config)[:, None])


def fit_phase(waves, config: CodecConfig = CodecConfig()):
    """Least-squares sine fit without range or amplitude checks.

    Fits ``wave ~ a*sin(theta) - b*cos(theta)`` through the 2x2 normal
    equations. Accepts one wave or a ``(batch, n_neurons)`` stack and returns
    ``(phase, amplitude, residual_rmse)`` arrays with the batch shape; phase is
    ``atan2(b, a)`` in radians.
    """
    y = np.asarray(waves, dtype=np.float64)
    if y.shape[-1] != config.n_neurons:
        raise InvalidConfig(f"wave length {y.shape[-1]} != n_neurons {config.n_neurons}")
    s = np.sin(config.carrier_phases)
    c = -np.cos(config.carrier_phases)
    ss, sc, cc = s @ s, s @ c, c @ c
    sy, cy = y @ s, y @ c
    det = ss * cc - sc * sc
    a = (cc * sy - sc * cy) / det
    b = (ss * cy - sc * sy) / det
    fitted = a[..., None] * s + b[..., None] * c
    residual = np.sqrt(np.mean((y - fitted) ** 2, axis=-1))
    return np.arctan2(b, a), np.hypot(a, b), residual


def decode(wave, config: CodecConfig = CodecConfig()) -> DecodeResult:
    """Recover the steering angle carried by the phase of ``wave``.

    Raises
    ------
    DegenerateWave
        Fitted amplitude below ``AMPLITUDE_FLOOR``; the phase is meaningless.
    PhaseOutOfRange
        The fitted phase lies outside [-pi/2, pi/2], i.e. the angle would
        exceed ``phi_max``. Use :func:`clamp_angle` on ``fit_phase`` output
        if saturation is wanted.
    """
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1:
        raise InvalidConfig(f"decode expects a 1-D wave, got shape {wave.shape}")
    phase, amplitude, residual = (float(v) for v in fit_phase(wave, config))
    if not amplitude >= AMPLITUDE_FLOOR:
        raise DegenerateWave(f"fitted amplitude {amplitude:.3g} below {AMPLITUDE_FLOOR:g}")
    if abs(phase) > np.pi / 2 + _PHASE_SLACK:
        raise PhaseOutOfRange(
            f"fitted phase {phase:.6f} rad maps to {float(phase_to_angle(phase, config)):.3f} deg, "
            f"outside +-{config.phi_max}"
        )
    angle = float(np.clip(phase_to_angle(phase, config), -config.phi_max, config.phi_max))
    return DecodeResult(angle=angle, amplitude=amplitude, residual_rmse=residual)


def bin_index(angle: float, config: CodecConfig = CodecConfig()) -> int:
    """0-based bin holding ``angle``; half-open bins, ``+phi_max`` goes to the last bin."""
    angle = _check_angle(angle, config)
    idx = int(math.floor((angle + config.phi_max) / config.bin_width))
    return min(idx, config.n_neurons - 1)


def encode_bins(
    angle: float,
    config: CodecConfig = CodecConfig(),
    smoothing_variance: float | None = DEFAULT_SMOOTHING_VARIANCE,
) -> np.ndarray:
    """Bin target for the softmax head.

    With ``smoothing_variance=None`` the result is one-hot. Otherwise each bin
    gets the Gaussian mass (centred on ``angle``, variance in deg^2) falling
    between its edges, renormalised over the covered range.
    """
    angle = _check_angle(angle, config)
    if smoothing_variance is None:
        probs = np.zeros(config.n_neurons)
        probs[bin_index(angle, config)] = 1.0
        return probs
    if not smoothing_variance > 0:
        raise InvalidConfig(f"smoothing_variance must be > 0, got {smoothing_variance!r}")
    z = (config.bin_edges - angle) / math.sqrt(smoothing_variance)
    mass = np.diff(ndtr(z))
    return mass / mass.sum()


def encode_bins_many(angles, config: CodecConfig, smoothing_variance: float | None) -> np.ndarray:
    return np.stack([encode_bins(a, config, smoothing_variance) for a in np.ravel(angles)])


def check_distribution(probs, config: CodecConfig, tol: float = 1e-6) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[-1] != config.n_neurons:
        raise InvalidDistribution(f"expected {config.n_neurons} bins, got {probs.shape[-1]}")
    if not np.all(np.isfinite(probs)) or np.any(probs < -tol):
        raise InvalidDistribution("probabilities must be finite and nonnegative")
    if np.any(np.abs(probs.sum(axis=-1) - 1.0) > tol):
        raise InvalidDistribution("probabilities must sum to 1")
    return probs


def decode_expected(probs, config: CodecConfig = CodecConfig()):
    """Probability-weighted mean of bin centres. Accepts one or a batch of distributions."""
    probs = check_distribution(probs, config)
    out = probs @ config.bin_centers
    return float(out) if np.ndim(out) == 0 else out


def clamp_angle(angle, config: CodecConfig = CodecConfig()):
    out = np.clip(angle, -config.phi_max, config.phi_max)
    return float(out) if np.ndim(out) == 0 else out
