"""Minimal numpy neural stack: dense/LSTM layers, loss heads, Adam, BPTT and gradient checks."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check, numeric_gradient, relative_error
from .layers import Dense, LSTMLayer, Parameter, dropout_backward, dropout_forward
from .losses import loss_nll, loss_regression, loss_sine, softmax
from .model import HeadSpec, LSTMLayerSpec, Model, ModelSpec, decode_outputs, forward_window
from .optim import DEFAULT_LR_GROUPS, adam_step, clip_grad_norm

__all__ = [
    "DEFAULT_LR_GROUPS",
    "Dense",
    "HeadSpec",
    "LSTMLayer",
    "LSTMLayerSpec",
    "Model",
    "ModelSpec",
    "Parameter",
    "adam_step",
    "clip_grad_norm",
    "decode_outputs",
    "dropout_backward",
    "dropout_forward",
    "forward_window",
    "grad_check",
    "load_checkpoint",
    "loss_nll",
    "loss_regression",
    "loss_sine",
    "numeric_gradient",
    "relative_error",
    "save_checkpoint",
    "softmax",
]
