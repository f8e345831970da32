"""Finite-difference verification of hand-written gradients."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidEpsilon

MAX_EXHAUSTIVE = 10_000


def relative_error(analytic, numeric, floor: float = 1e-8) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)`` elementwise."""
    a = np.asarray(analytic, dtype=np.longdouble)
    n = np.asarray(numeric, dtype=np.longdouble)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_gradient(f, x: np.ndarray, epsilon: float = 1e-5, indices=None) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. entries of ``x`` (perturbed in place, then restored)."""
    if not epsilon > 0:
        raise InvalidEpsilon(f"epsilon must be > 0, got {epsilon!r}")
    flat = x.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(flat.size, dtype=x.dtype)
    for k in idx:
        orig = flat[k]
        flat[k] = orig + epsilon
        up = f()
        flat[k] = orig - epsilon
        down = f()
        flat[k] = orig
        out[k] = (up - down) / (2.0 * epsilon)
    return out.reshape(x.shape)


def grad_check(model, sample, loss_fn=None, epsilon: float = 1e-5, max_scalars: int = MAX_EXHAUSTIVE,
               seed: int = 0, precision: str = "double", floor: float = 1e-8) -> float:
    """Largest relative error between analytic and central-difference parameter gradients.

    ``sample`` is ``(windows, target_angles)``; ``loss_fn(outputs, targets)``
    defaults to the model's own head loss. The model runs in eval mode (no
    dropout). When the model has more than ``max_scalars`` parameters a seeded
    random subset of that size is checked.

    The analytic gradient is always computed in float64. ``precision`` selects
    the arithmetic of the perturbed forward passes: ``"double"`` or
    ``"extended"`` (``np.longdouble``). In double precision the central
    difference carries roughly ``1e-16 * |loss| / epsilon`` of rounding noise,
    which swamps the relative error of near-zero gradient entries.
    """
    if not epsilon > 0:
        raise InvalidEpsilon(f"epsilon must be > 0, got {epsilon!r}")
    if precision not in ("double", "extended"):
        raise ValueError(f"precision must be 'double' or 'extended', got {precision!r}")
    X, targets = sample
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    loss_fn = loss_fn or model.loss

    model.zero_grad()
    out, cache = model.forward(X)
    _, d_out = loss_fn(out, targets)
    model.backward(cache, d_out)

    params = model.params
    originals = [p.value for p in params]
    if precision == "extended":
        X = X.astype(np.longdouble)
        for p in params:
            p.value = p.value.astype(np.longdouble)

    def loss_only():
        return loss_fn(model.forward(X)[0], targets)[0]

    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    if total > max_scalars:
        chosen = np.sort(np.random.default_rng(seed).choice(total, size=max_scalars, replace=False))
    else:
        chosen = np.arange(total)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    try:
        for p, lo, hi in zip(params, offsets[:-1], offsets[1:]):
            local = chosen[(chosen >= lo) & (chosen < hi)] - lo
            if local.size == 0:
                continue
            numeric = numeric_gradient(loss_only, p.value, epsilon, local.tolist()).reshape(-1)[local]
            analytic = p.grad.reshape(-1)[local]
            worst = max(worst, float(relative_error(analytic, numeric, floor).max()))
    finally:
        for p, value in zip(params, originals):
            p.value = value
    return worst
