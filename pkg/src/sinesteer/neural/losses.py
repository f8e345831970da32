"""Loss heads. Each returns ``(mean loss over the batch, gradient w.r.t. head output)``.

Inputs may be a single head output (1-D) or a batch (2-D); the gradient has
the same shape as the input. Losses come back as numpy scalars in the input's
float type, so extended-precision evaluation is not rounded to double.
"""

from __future__ import annotations

import numpy as np

from ..angle_codec import CodecConfig, encode_bins, encode_many
from ..errors import ShapeMismatch

DEGENERATE_LOSS = 1e-12


def as_float(x) -> np.ndarray:
    """Array in float64, or in a wider float type if the input already has one."""
    x = np.asarray(x)
    return x.astype(np.result_type(x.dtype, np.float64), copy=False)


def _as_batch(output, width: int | None = None):
    y = as_float(output)
    single = y.ndim == 1
    y2 = y[None, :] if single else y
    if y2.ndim != 2 or (width is not None and y2.shape[1] != width):
        raise ShapeMismatch(f"head output shape {y.shape} does not match width {width}")
    return y2, single


def _targets(target_angles, batch: int) -> np.ndarray:
    t = np.asarray(target_angles, dtype=np.float64).reshape(-1)
    if t.size != batch:
        raise ShapeMismatch(f"{t.size} targets for a batch of {batch}")
    return t


def loss_sine(output, target_angles, codec: CodecConfig):
    """RMSE between predicted and encoded target waveforms, per sample, then batch mean.

    A sample whose RMSE is below ``DEGENERATE_LOSS`` contributes a zero
    gradient (sqrt is not differentiable at 0).
    """
    y, single = _as_batch(output, codec.n_neurons)
    target = encode_many(_targets(target_angles, y.shape[0]), codec)
    diff = y - target
    per_sample = np.sqrt(np.mean(diff * diff, axis=1))
    safe = per_sample >= DEGENERATE_LOSS
    scale = np.zeros_like(per_sample)
    scale[safe] = 1.0 / (codec.n_neurons * per_sample[safe] * y.shape[0])
    grad = diff * scale[:, None]
    return per_sample.mean(), (grad[0] if single else grad)


def loss_regression(output, target_angles, phi_max: float):
    """Squared error on the angle normalised to [-1, 1] by ``phi_max``."""
    y, single = _as_batch(output, 1)
    t = _targets(target_angles, y.shape[0]) / phi_max
    diff = y[:, 0] - t
    grad = (2.0 * diff / y.shape[0])[:, None]
    return np.mean(diff * diff), (grad[0] if single else grad)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_nll(logits, target_angles, codec: CodecConfig, smoothing_variance: float | None):
    """Cross-entropy of softmax(logits) against the (optionally smoothed) bin target."""
    z, single = _as_batch(logits, codec.n_neurons)
    t = _targets(target_angles, z.shape[0])
    q = np.stack([encode_bins(a, codec, smoothing_variance) for a in t])
    logp = log_softmax(z)
    loss = -np.sum(q * logp, axis=1)
    grad = (np.exp(logp) - q) / z.shape[0]
    return loss.mean(), (grad[0] if single else grad)
