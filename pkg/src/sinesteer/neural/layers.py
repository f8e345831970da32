"""Dense and LSTM layers with hand-derived backward passes.

Tensors are float64 numpy arrays (row-major). Forward passes return an
explicit cache instead of stashing state on the layer, so one layer object
can be unrolled over time and evaluated from several threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


@dataclass(eq=False)
class Parameter:
    """A trainable tensor with its gradient and Adam moment buffers."""

    name: str
    value: np.ndarray
    group: str = "trunk"
    grad: np.ndarray = field(default=None, repr=False)
    adam_m: np.ndarray = field(default=None, repr=False)
    adam_v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        for attr in ("grad", "adam_m", "adam_v"):
            buf = getattr(self, attr)
            if buf is None:
                setattr(self, attr, np.zeros_like(self.value))
            elif np.shape(buf) != self.value.shape:
                raise ShapeMismatch(f"{self.name}.{attr} shape {np.shape(buf)} != {self.value.shape}")
            else:
                setattr(self, attr, np.array(buf, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    """Affine map ``x @ W + b`` with optional tanh."""

    def __init__(self, name: str, in_dim: int, out_dim: int, rng: np.random.Generator, tanh: bool = True,
                 group: str = "trunk"):
        if in_dim < 1 or out_dim < 1:
            raise ShapeMismatch(f"{name}: dimensions must be positive, got {in_dim}x{out_dim}")
        self.in_dim, self.out_dim, self.tanh = in_dim, out_dim, tanh
        self.W = Parameter(f"{name}.W", uniform_init(rng, in_dim, (in_dim, out_dim)), group)
        self.b = Parameter(f"{name}.b", np.zeros(out_dim), group)

    @property
    def params(self) -> list[Parameter]:
        return [self.W, self.b]

    def forward(self, x: np.ndarray):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatch(f"{self.W.name}: expected (batch, {self.in_dim}) input, got {x.shape}")
        y = x @ self.W.value + self.b.value
        if self.tanh:
            y = np.tanh(y)
        return y, (x, y)

    def backward(self, cache, dy: np.ndarray) -> np.ndarray:
        x, y = cache
        if dy.shape != y.shape:
            raise ShapeMismatch(f"{self.W.name}: upstream grad {dy.shape} != output {y.shape}")
        dz = dy * (1.0 - y * y) if self.tanh else dy
        self.W.grad += x.T @ dz
        self.b.grad += dz.sum(axis=0)
        return dz @ self.W.value.T


class LSTMLayer:
    """Four-gate LSTM (input, forget, output, candidate).

    One fused weight ``W`` of shape ``(input_dim + hidden_dim, 4*hidden_dim)``
    acts on ``[x, h]``; gate blocks are ordered i, f, o, g.
    """

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 forget_bias: float = 1.0, group: str = "trunk"):
        if input_dim < 1 or hidden_dim < 1:
            raise ShapeMismatch(f"{name}: dimensions must be positive")
        self.input_dim, self.hidden_dim = input_dim, hidden_dim
        fan_in = input_dim + hidden_dim
        self.W = Parameter(f"{name}.W", uniform_init(rng, fan_in, (fan_in, 4 * hidden_dim)), group)
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = forget_bias
        self.b = Parameter(f"{name}.b", b, group)

    @property
    def params(self) -> list[Parameter]:
        return [self.W, self.b]

    def initial_state(self, batch: int):
        return np.zeros((batch, self.hidden_dim)), np.zeros((batch, self.hidden_dim))

    def cell_forward(self, x: np.ndarray, h: np.ndarray, c: np.ndarray):
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeMismatch(f"{self.W.name}: expected (batch, {self.input_dim}) input, got {x.shape}")
        if h.shape != (x.shape[0], self.hidden_dim) or c.shape != h.shape:
            raise ShapeMismatch(f"{self.W.name}: state shape {h.shape}/{c.shape} mismatched")
        H = self.hidden_dim
        xh = np.concatenate([x, h], axis=1)
        z = xh @ self.W.value + self.b.value
        ifo = sigmoid(z[:, :3 * H])
        i, f, o = ifo[:, :H], ifo[:, H:2 * H], ifo[:, 2 * H:]
        g = np.tanh(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        return h_new, c_new, (xh, c, i, f, o, g, tc)

    def cell_backward(self, cache, dh: np.ndarray, dc: np.ndarray):
        """Backprop one step; returns ``(dx, dh_prev, dc_prev)`` and accumulates parameter grads."""
        xh, c_prev, i, f, o, g, tc = cache
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dh * tc * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ],
            axis=1,
        )
        self.W.grad += xh.T @ dz
        self.b.grad += dz.sum(axis=0)
        dxh = dz @ self.W.value.T
        return dxh[:, :self.input_dim], dxh[:, self.input_dim:], dc * f

    def forward_sequence(self, xs: np.ndarray):
        """Run ``xs`` of shape ``(batch, steps, input_dim)``; returns all hidden states and step caches."""
        batch, steps, _ = xs.shape
        h, c = self.initial_state(batch)
        hs = np.empty((batch, steps, self.hidden_dim), dtype=np.result_type(xs, self.W.value))
        caches = []
        for t in range(steps):
            h, c, cache = self.cell_forward(xs[:, t], h, c)
            hs[:, t] = h
            caches.append(cache)
        return hs, caches

    def backward_sequence(self, caches, dhs: np.ndarray) -> np.ndarray:
        """BPTT given upstream gradients on every hidden state ``(batch, steps, hidden)``."""
        batch, steps, _ = dhs.shape
        dxs = np.empty((batch, steps, self.input_dim))
        dh_next = np.zeros((batch, self.hidden_dim))
        dc_next = np.zeros((batch, self.hidden_dim))
        for t in reversed(range(steps)):
            dx, dh_next, dc_next = self.cell_backward(caches[t], dhs[:, t] + dh_next, dc_next)
            dxs[:, t] = dx
        return dxs


def dropout_forward(x: np.ndarray, rate: float, training: bool, rng: np.random.Generator | None):
    """Inverted dropout. Returns ``(output, mask)``; ``mask`` is None when inactive."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate!r}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs the run's random generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(mask: np.ndarray | None, dy: np.ndarray) -> np.ndarray:
    return dy if mask is None else dy * mask
