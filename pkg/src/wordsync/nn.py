"""RNN cells, perceptrons, and the bidirectional sequence encoder.

Parameter containers expose a parameters() ordered mapping so optimizers and
checkpoints can address every trainable tensor by name.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import ShapeError, Tensor

WEIGHT_INIT_RANGE = 0.1
FORGET_GATE_BIAS = 1.0

ACTIVATIONS = {
    "tanh": ag.tanh,
    "relu": ag.relu,
    "linear": lambda t: t,
}


def init_weight(rng, rows, cols=None, name=None):
    shape = (rows,) if cols is None else (rows, cols)
    return ag.parameter(rng.uniform(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE, size=shape), name=name)


def init_zeros(shape, name=None):
    return ag.parameter(np.zeros(shape), name=name)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """w @ x + b with shape validation."""
    if w.values.ndim != 2 or x.values.ndim != 1:
        raise ShapeError(f"affine: need matrix @ vector, got {w.shape} @ {x.shape}")
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"affine: weight {w.shape} does not accept input {x.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"affine: bias {b.shape} does not match output {(w.shape[0],)}")
    return ag.add(ag.matmul(w, x), b)


class RnnCellParams:
    """One LSTM cell: input/hidden weights and biases for the four gates.

    Gate layout along the 4H axis is [input, forget, cell, output].  The
    forget-gate bias block is initialized to FORGET_GATE_BIAS.
    """

    def __init__(self, input_size, hidden_size, rng=None, prefix="lstm"):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.prefix = prefix
        if rng is None:
            self.w_x = init_zeros((4 * hidden_size, input_size), f"{prefix}.w_x")
            self.w_h = init_zeros((4 * hidden_size, hidden_size), f"{prefix}.w_h")
            self.b = init_zeros(4 * hidden_size, f"{prefix}.b")
        else:
            self.w_x = init_weight(rng, 4 * hidden_size, input_size, f"{prefix}.w_x")
            self.w_h = init_weight(rng, 4 * hidden_size, hidden_size, f"{prefix}.w_h")
            bias = np.zeros(4 * hidden_size)
            bias[hidden_size:2 * hidden_size] = FORGET_GATE_BIAS
            self.b = ag.parameter(bias, name=f"{prefix}.b")

    def parameters(self):
        return {t.name: t for t in (self.w_x, self.w_h, self.b)}


def lstm_step(x: Tensor, h: Tensor, c: Tensor, p: RnnCellParams):
    """One gated update; returns (h', c')."""
    hs = p.hidden_size
    if x.shape != (p.input_size,):
        raise ShapeError(f"lstm_step: input {x.shape}, cell expects {(p.input_size,)}")
    if h.shape != (hs,) or c.shape != (hs,):
        raise ShapeError(f"lstm_step: state {h.shape}/{c.shape}, cell expects {(hs,)}")
    pre = ag.add(ag.add(ag.matmul(p.w_x, x), ag.matmul(p.w_h, h)), p.b)
    i = ag.sigmoid(ag.narrow(pre, 0, hs))
    f = ag.sigmoid(ag.narrow(pre, hs, 2 * hs))
    g = ag.tanh(ag.narrow(pre, 2 * hs, 3 * hs))
    o = ag.sigmoid(ag.narrow(pre, 3 * hs, 4 * hs))
    c2 = ag.add(ag.mul(f, c), ag.mul(i, g))
    h2 = ag.mul(o, ag.tanh(c2))
    return h2, c2


def lstm_step_values(x, h, c, p):
    """Graph-free lstm_step over raw arrays (beam scoring path)."""
    hs = p.hidden_size
    pre = p.w_x.values @ x + p.w_h.values @ h + p.b.values
    i = 1.0 / (1.0 + np.exp(-pre[0:hs]))
    f = 1.0 / (1.0 + np.exp(-pre[hs:2 * hs]))
    g = np.tanh(pre[2 * hs:3 * hs])
    o = 1.0 / (1.0 + np.exp(-pre[3 * hs:4 * hs]))
    c2 = f * c + i * g
    h2 = o * np.tanh(c2)
    return h2, c2


class MlpParams:
    """Per-layer weights, biases, and activation identifiers."""

    def __init__(self, sizes, activations, rng=None, prefix="mlp"):
        if len(activations) != len(sizes) - 1:
            raise ShapeError("MlpParams: one activation per layer required")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        self.sizes = list(sizes)
        self.activations = list(activations)
        self.prefix = prefix
        self.weights = []
        self.biases = []
        for li, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if rng is None:
                w = init_zeros((n_out, n_in), f"{prefix}.w{li}")
            else:
                w = init_weight(rng, n_out, n_in, f"{prefix}.w{li}")
            b = init_zeros(n_out, f"{prefix}.b{li}")
            self.weights.append(w)
            self.biases.append(b)

    def parameters(self):
        out = {}
        for w, b in zip(self.weights, self.biases):
            out[w.name] = w
            out[b.name] = b
        return out


def mlp_apply(x: Tensor, p: MlpParams) -> Tensor:
    for w, b, act in zip(p.weights, p.biases, p.activations):
        x = ACTIVATIONS[act](affine(x, w, b))
    return x


def mlp_apply_values(x, p):
    """Graph-free MLP over a raw vector or a (batch, features) matrix."""
    batched = x.ndim == 2
    for w, b, act in zip(p.weights, p.biases, p.activations):
        x = x @ w.values.T + b.values if batched else w.values @ x + b.values
        if act == "tanh":
            x = np.tanh(x)
        elif act == "relu":
            x = np.maximum(x, 0.0)
    return x


def bilstm_encode(seq, fwd: RnnCellParams, bwd: RnnCellParams, proj: MlpParams) -> Tensor:
    """Project the concatenated final states of a forward and a backward pass."""
    seq = list(seq)
    if not seq:
        raise ValueError("bilstm_encode: empty input sequence")
    h = ag.constant(np.zeros(fwd.hidden_size))
    c = ag.constant(np.zeros(fwd.hidden_size))
    for x in seq:
        h, c = lstm_step(x, h, c, fwd)
    hb = ag.constant(np.zeros(bwd.hidden_size))
    cb = ag.constant(np.zeros(bwd.hidden_size))
    for x in reversed(seq):
        hb, cb = lstm_step(x, hb, cb, bwd)
    return mlp_apply(ag.concat([h, hb]), proj)
