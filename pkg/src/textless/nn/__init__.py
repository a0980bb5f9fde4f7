"""Minimal reverse-mode layers, optimiser and gradient checker."""
from textless.nn.gradcheck import grad_check
from textless.nn.layers import (
    LSTM,
    Conv1d,
    Embedding,
    LayerNorm,
    Linear,
    LSTMCell,
    Module,
    Param,
    ReLU,
    log_softmax,
    sigmoid,
    softmax_xent,
)
from textless.nn.optim import Adam, NonFiniteGradient, clip_grad_norm

__all__ = [
    "LSTM", "Adam", "Conv1d", "Embedding", "LayerNorm", "LSTMCell", "Linear", "Module",
    "NonFiniteGradient", "Param", "ReLU", "clip_grad_norm", "grad_check", "log_softmax",
    "sigmoid", "softmax_xent",
]
