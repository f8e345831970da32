"""Feedforward and C-LSTM steering models with interchangeable output heads."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..angle_codec import (
    AMPLITUDE_FLOOR,
    DEFAULT_SMOOTHING_VARIANCE,
    CodecConfig,
    clamp_angle,
    decode_expected,
    fit_phase,
    phase_to_angle,
)
from ..errors import InvalidParams, ShapeMismatch
from .layers import Dense, LSTMLayer, Parameter, dropout_backward, dropout_forward
from .losses import as_float, loss_nll, loss_regression, loss_sine, softmax

HEAD_KINDS = ("regression", "nll_bins", "sine_wave")
MODEL_KINDS = ("feedforward", "c_lstm")


@dataclass(frozen=True)
class HeadSpec:
    kind: str = "sine_wave"
    codec: CodecConfig = field(default_factory=CodecConfig)
    smoothing_variance: float | None = DEFAULT_SMOOTHING_VARIANCE

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise InvalidParams(f"head kind must be one of {HEAD_KINDS}, got {self.kind!r}")

    @property
    def width(self) -> int:
        return 1 if self.kind == "regression" else self.codec.n_neurons

    @property
    def uses_tanh(self) -> bool:
        # Softmax already normalises the bin logits; bounding them with tanh
        # would cap the attainable confidence at e^2 between any two bins.
        return self.kind != "nll_bins"


@dataclass(frozen=True)
class LSTMLayerSpec:
    input_dim: int
    hidden_dim: int


@dataclass(frozen=True)
class ModelSpec:
    """``hidden_sizes`` are LSTM hidden dims for ``c_lstm`` and dense widths for ``feedforward``."""

    kind: str
    feature_dim: int
    hidden_sizes: tuple[int, ...] = (64, 64)
    head: HeadSpec = field(default_factory=HeadSpec)
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidParams(f"model kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.feature_dim < 1 or not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise InvalidParams("feature_dim and every hidden size must be positive, with >= 1 hidden layer")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidParams(f"dropout_rate must lie in [0, 1), got {self.dropout_rate!r}")

    def lstm_layers(self) -> list[LSTMLayerSpec]:
        dims = (self.feature_dim,) + self.hidden_sizes
        return [LSTMLayerSpec(a, b) for a, b in zip(dims[:-1], dims[1:])]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        head = d["head"]
        return cls(
            kind=d["kind"],
            feature_dim=int(d["feature_dim"]),
            hidden_sizes=tuple(d["hidden_sizes"]),
            head=HeadSpec(
                kind=head["kind"],
                codec=CodecConfig(**head["codec"]),
                smoothing_variance=head["smoothing_variance"],
            ),
            dropout_rate=float(d["dropout_rate"]),
        )


class Model:
    """Trunk (stacked LSTM or dense layers) plus a dense classification/regression head.

    The same layer objects are reused at every timestep, so the parameter
    count does not depend on the window length.
    """

    def __init__(self, spec: ModelSpec, rng: np.random.Generator | int = 0, forget_bias: float = 1.0):
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.spec = spec
        if spec.kind == "c_lstm":
            self.trunk = [
                LSTMLayer(f"lstm{k}", s.input_dim, s.hidden_dim, rng, forget_bias=forget_bias)
                for k, s in enumerate(spec.lstm_layers())
            ]
        else:
            dims = (spec.feature_dim,) + spec.hidden_sizes
            self.trunk = [
                Dense(f"dense{k}", a, b, rng, tanh=True) for k, (a, b) in enumerate(zip(dims[:-1], dims[1:]))
            ]
        self.head = Dense("head", spec.hidden_sizes[-1], spec.head.width, rng, tanh=spec.head.uses_tanh,
                          group="head")
        # Fixed (untrained) input transform x -> (x - shift) * scale; identity by default.
        self.input_shift = np.zeros(spec.feature_dim)
        self.input_scale = np.ones(spec.feature_dim)

    def set_input_standardization(self, features: np.ndarray) -> None:
        """Standardize inputs with per-feature mean and std of ``features`` (rows = frames)."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.spec.feature_dim or len(features) == 0:
            raise ShapeMismatch(f"expected (frames, {self.spec.feature_dim}) features, got {features.shape}")
        std = features.std(axis=0)
        self.input_shift = features.mean(axis=0)
        self.input_scale = np.where(std > 1e-12, 1.0 / np.where(std > 1e-12, std, 1.0), 1.0)

    @property
    def params(self) -> list[Parameter]:
        out = [p for layer in self.trunk for p in layer.params]
        return out + self.head.params

    def named_params(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.params}

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def forward(self, X: np.ndarray, training: bool = False, rng: np.random.Generator | None = None):
        """Many-to-one forward over windows ``X`` of shape ``(batch, w, feature_dim)``.

        Returns ``(head_output, cache)``. ``feedforward`` looks only at the last frame.
        """
        X = as_float(X)
        if X.ndim != 3 or X.shape[2] != self.spec.feature_dim or X.shape[1] < 1:
            raise ShapeMismatch(f"expected (batch, w, {self.spec.feature_dim}) windows, got {X.shape}")
        X = (X - self.input_shift) * self.input_scale
        rate = self.spec.dropout_rate
        caches = []
        masks = []
        if self.spec.kind == "c_lstm":
            seq = X
            for layer in self.trunk:
                seq, step_caches = layer.forward_sequence(seq)
                caches.append(step_caches)
            feat = seq[:, -1]
            feat, mask = dropout_forward(feat, rate, training, rng)
            masks.append(mask)
        else:
            feat = X[:, -1]
            for layer in self.trunk:
                feat, cache = layer.forward(feat)
                caches.append(cache)
                feat, mask = dropout_forward(feat, rate, training, rng)
                masks.append(mask)
        out, head_cache = self.head.forward(feat)
        return out, (X.shape, caches, masks, head_cache)

    def backward(self, cache, d_out: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients; returns the gradient w.r.t. the input windows."""
        x_shape, caches, masks, head_cache = cache
        d_feat = self.head.backward(head_cache, d_out)
        dX = np.zeros(x_shape, dtype=d_out.dtype)
        if self.spec.kind == "c_lstm":
            d_feat = dropout_backward(masks[0], d_feat)
            batch, steps, _ = x_shape
            d_seq = np.zeros((batch, steps, self.trunk[-1].hidden_dim))
            d_seq[:, -1] = d_feat
            for layer, step_caches in zip(reversed(self.trunk), reversed(caches)):
                d_seq = layer.backward_sequence(step_caches, d_seq)
            dX[:] = d_seq
        else:
            for layer, layer_cache, mask in zip(reversed(self.trunk), reversed(caches), reversed(masks)):
                d_feat = layer.backward(layer_cache, dropout_backward(mask, d_feat))
            dX[:, -1] = d_feat
        return dX * self.input_scale

    def loss(self, out: np.ndarray, target_angles):
        head = self.spec.head
        if head.kind == "sine_wave":
            return loss_sine(out, target_angles, head.codec)
        if head.kind == "regression":
            return loss_regression(out, target_angles, head.codec.phi_max)
        return loss_nll(out, target_angles, head.codec, head.smoothing_variance)

    def predict(self, X: np.ndarray, batch_size: int = 512) -> np.ndarray:
        """Eval-mode head outputs for a stack of windows, computed in fixed-order chunks."""
        X = np.asarray(X)
        outs = [self.forward(X[k:k + batch_size])[0] for k in range(0, len(X), batch_size)]
        return np.concatenate(outs, axis=0) if outs else np.zeros((0, self.spec.head.width))


def forward_window(model: Model, window: np.ndarray) -> np.ndarray:
    """Eval-mode head output for one ``(w, feature_dim)`` window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ShapeMismatch(f"expected a (w, feature_dim) window, got {window.shape}")
    return model.forward(window[None])[0][0]


def decode_outputs(head: HeadSpec, outputs: np.ndarray):
    """Map a batch of head outputs to angles, clamped to +-phi_max.

    Returns ``(angles, clamp_count, degenerate_count)``. Sine waves too flat to
    carry a phase decode to 0 deg and are counted as degenerate.
    """
    codec = head.codec
    outputs = np.asarray(outputs, dtype=np.float64)
    if head.kind == "regression":
        raw = codec.phi_max * outputs[:, 0]
        degenerate = 0
    elif head.kind == "nll_bins":
        raw = np.asarray(decode_expected(softmax(outputs), codec), dtype=np.float64).reshape(-1)
        degenerate = 0
    else:
        phase, amplitude, _ = fit_phase(outputs, codec)
        raw = phase_to_angle(phase, codec)
        flat = amplitude < AMPLITUDE_FLOOR
        raw = np.where(flat, 0.0, raw)
        degenerate = int(flat.sum())
    clamped = clamp_angle(raw, codec)
    return np.asarray(clamped, dtype=np.float64).reshape(-1), int(np.sum(np.abs(raw) > codec.phi_max)), degenerate
