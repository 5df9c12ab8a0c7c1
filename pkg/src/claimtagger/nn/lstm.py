"""LSTM cell parameters and bidirectional sequence encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .autograd import Parameter, Tensor, concat, matmul, mul, narrow, sigmoid, tanh, xavier_uniform

FORGET_BIAS = 1.0


@dataclass
class LstmCellParams:
    """Gate weights for one direction, stacked input/forget/cell/output.

    W is (4H x I), U is (4H x H), b is (4H,).  The forget-gate slice of the
    bias starts at ``FORGET_BIAS`` to keep early memory flow open.
    """

    W: Parameter
    U: Parameter
    b: Parameter

    @property
    def hidden_dim(self):
        return self.U.data.shape[1]

    @property
    def input_dim(self):
        return self.W.data.shape[1]

    def parameters(self):
        return [self.W, self.U, self.b]


def init_lstm_cell(input_dim, hidden_dim, name, rng, forget_bias=FORGET_BIAS):
    if input_dim < 1 or hidden_dim < 1:
        raise ContractError("LSTM dimensions must be positive")
    # per-gate fans: each of the four blocks maps input_dim (or hidden) -> hidden
    W = xavier_uniform((4 * hidden_dim, input_dim), rng, fan_in=input_dim, fan_out=hidden_dim)
    U = xavier_uniform((4 * hidden_dim, hidden_dim), rng, fan_in=hidden_dim, fan_out=hidden_dim)
    b = np.zeros(4 * hidden_dim)
    b[hidden_dim:2 * hidden_dim] = forget_bias
    return LstmCellParams(
        W=Parameter(W, f"{name}.W"),
        U=Parameter(U, f"{name}.U"),
        b=Parameter(b, f"{name}.b"),
    )


def lstm_step(params, x, h, c):
    """One cell update; returns the next (h, c)."""
    H = params.hidden_dim
    pre = matmul(params.W, x) + matmul(params.U, h) + params.b
    i = sigmoid(narrow(pre, 0, H))
    f = sigmoid(narrow(pre, H, H))
    g = tanh(narrow(pre, 2 * H, H))
    o = sigmoid(narrow(pre, 3 * H, H))
    c_next = mul(f, c) + mul(i, g)
    h_next = mul(o, tanh(c_next))
    return h_next, c_next


def bilstm_encode(inputs, fwd, bwd):
    """Run both directions over a sequence of input vectors.

    Returns (outputs, final_forward_h, final_backward_h) where
    ``outputs[t]`` is the concatenation of the forward state at t and the
    backward state at t (2H each).  The final backward state is the one
    produced at position 0.
    """
    if not inputs:
        raise ContractError("bilstm_encode requires a nonempty sequence")
    for x in inputs:
        if x.data.shape != (fwd.input_dim,):
            raise ContractError(
                f"input vector shape {x.data.shape} does not match input dim {fwd.input_dim}")

    def run(cell, xs):
        h = Tensor(np.zeros(cell.hidden_dim))
        c = Tensor(np.zeros(cell.hidden_dim))
        states = []
        for x in xs:
            h, c = lstm_step(cell, x, h, c)
            states.append(h)
        return states

    fwd_states = run(fwd, inputs)
    bwd_states = run(bwd, list(reversed(inputs)))
    bwd_states.reverse()
    outputs = [concat([hf, hb]) for hf, hb in zip(fwd_states, bwd_states)]
    return outputs, fwd_states[-1], bwd_states[0]
