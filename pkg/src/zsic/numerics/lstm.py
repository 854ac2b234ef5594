"""LSTM recurrence as a single fused graph operation with hand-written BPTT.

Gates are stacked in the order (input, forget, output, candidate) inside one
weight matrix of shape (4*hidden, input + hidden) acting on ``[x_t; h_{t-1}]``.
Sequences in a batch are right-padded; ``mask`` marks the real positions.
Padded steps leave the carried state untouched and emit zeros, so the
reverse pass starts each sequence at its own last token.
"""

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, _result, concat


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmParams:
    W: Tensor
    b: Tensor

    @property
    def hidden_dim(self):
        return self.b.shape[0] // 4

    @property
    def input_dim(self):
        return self.W.shape[1] - self.hidden_dim

    def gate(self, name):
        """Return (weight, bias) numpy views for gate ``i``, ``f``, ``o`` or ``c``."""
        k = "ifoc".index(name)
        h = self.hidden_dim
        return self.W.data[k * h:(k + 1) * h], self.b.data[k * h:(k + 1) * h]

    @classmethod
    def init(cls, input_dim, hidden_dim, rng, scale=0.1, forget_bias=1.0):
        W = rng.uniform(-scale, scale, size=(4 * hidden_dim, input_dim + hidden_dim))
        b = rng.uniform(-scale, scale, size=4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = forget_bias
        return cls(Tensor(W, requires_grad=True), Tensor(b, requires_grad=True))


def lstm(x, mask, params, reverse=False):
    """Run one LSTM direction over ``x`` (B, L, D); returns hidden states (B, L, H)."""
    X = x.data
    W, bias = params.W.data, params.b.data
    B, L, D = X.shape
    H = bias.shape[0] // 4
    if W.shape != (4 * H, D + H):
        raise ValueError(f"LSTM weight shape {W.shape} does not fit input dim {D}, hidden {H}")
    mask = np.asarray(mask, dtype=np.float64).reshape(B, L)

    steps = range(L - 1, -1, -1) if reverse else range(L)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    out = np.zeros((B, L, H))
    cache = []
    for t in steps:
        xh = np.concatenate([X[:, t], h], axis=1)
        z = xh @ W.T + bias
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        o = sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        m = mask[:, t:t + 1]
        cache.append((t, xh, i, f, o, g, c, tc, m))
        c = m * c_new + (1.0 - m) * c
        h = m * h_new + (1.0 - m) * h
        out[:, t] = m * h_new

    def backward(dout):
        dX = np.zeros_like(X)
        dW = np.zeros_like(W)
        db = np.zeros_like(bias)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t, xh, i, f, o, g, c_prev, tc, m in reversed(cache):
            keep = 1.0 - m
            dh = m * (dout[:, t] + dh_next)
            dc = m * dc_next + dh * o * (1.0 - tc * tc)
            dz = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    dh * tc * o * (1.0 - o),
                    dc * i * (1.0 - g * g),
                ],
                axis=1,
            )
            dW += dz.T @ xh
            db += dz.sum(axis=0)
            dxh = dz @ W
            dX[:, t] = dxh[:, :D]
            dh_next = dxh[:, D:] + keep * dh_next
            dc_next = dc * f + keep * dc_next
        return dX, dW, db

    return _result(out, (x, params.W, params.b), backward)


def bilstm(x, mask, fwd, bwd):
    """Concatenate forward and reverse LSTM states: (B, L, Hf + Hb)."""
    return concat([lstm(x, mask, fwd), lstm(x, mask, bwd, reverse=True)], axis=-1)


def bilstm_forward(seq, fwd, bwd):
    """Encode one sequence of vectors; returns a (2*hidden, N) matrix.

    Column t holds the forward state after step t stacked on the backward
    state that has read tokens N..t.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise ValueError("bilstm_forward expects a non-empty sequence of vectors")
    if seq.shape[1] != fwd.input_dim or seq.shape[1] != bwd.input_dim:
        raise ValueError(
            f"input dim {seq.shape[1]} does not match LSTM input dims "
            f"{fwd.input_dim}/{bwd.input_dim}"
        )
    x = Tensor(seq[None])
    out = bilstm(x, np.ones((1, seq.shape[0])), fwd, bwd)
    return out.data[0].T.copy()
