"""Exact linear-chain CRF inference and training loss.

A sequence y over K labels is scored as

    score(y) = start[y_1] + sum_t e[t, y_t] + sum_t A[y_{t-1}, y_t] + end[y_T]

with emissions e (T x K) and transition table A (K x K).  The partition
function, marginals, and pairwise marginals come from forward-backward in
log space; decoding is Viterbi.  All recursions use max-shifted
log-sum-exp, so arbitrarily scaled emissions stay stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .nn.autograd import Parameter, Tensor, _result


@dataclass
class CrfParams:
    """Transition, start, and end score tables for K labels."""

    transitions: Parameter  # (K, K), A[prev, next]
    start: Parameter        # (K,)
    end: Parameter          # (K,)

    @property
    def num_labels(self):
        return self.start.data.shape[0]

    def parameters(self):
        return [self.transitions, self.start, self.end]

    @classmethod
    def create(cls, num_labels, name="crf", learn_boundaries=True):
        if num_labels < 1:
            raise ContractError("CRF needs at least one label")
        return cls(
            transitions=Parameter(np.zeros((num_labels, num_labels)), f"{name}.transitions"),
            start=Parameter(np.zeros(num_labels), f"{name}.start", trainable=learn_boundaries),
            end=Parameter(np.zeros(num_labels), f"{name}.end", trainable=learn_boundaries),
        )


def _emissions_array(emissions):
    e = emissions.data if isinstance(emissions, Tensor) else np.asarray(emissions, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 1:
        raise ContractError(f"emissions must be a T x K matrix with T >= 1, got shape {e.shape}")
    return e


def _check_labels(labels, T, K):
    labels = list(labels)
    if len(labels) != T:
        raise ContractError(f"label sequence length {len(labels)} != T {T}")
    for y in labels:
        if not 0 <= y < K:
            raise ContractError(f"label {y} out of range [0, {K})")
    return labels


def _logsumexp(v, axis=None):
    m = np.max(v, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True))
    if axis is None:
        return float(out.reshape(-1)[0])
    return np.squeeze(out, axis=axis)


def sequence_score(emissions, labels, params):
    e = _emissions_array(emissions)
    T, K = e.shape
    y = _check_labels(labels, T, K)
    A = params.transitions.data
    score = params.start.data[y[0]] + e[0, y[0]]
    for t in range(1, T):
        score += A[y[t - 1], y[t]] + e[t, y[t]]
    score += params.end.data[y[-1]]
    return float(score)


def _forward(e, params):
    T, K = e.shape
    A = params.transitions.data
    alpha = np.empty((T, K))
    alpha[0] = params.start.data + e[0]
    for t in range(1, T):
        # alpha[t, j] = e[t, j] + lse_i(alpha[t-1, i] + A[i, j])
        alpha[t] = e[t] + _logsumexp(alpha[t - 1][:, None] + A, axis=0)
    return alpha


def _backward(e, params):
    T, K = e.shape
    A = params.transitions.data
    beta = np.empty((T, K))
    beta[T - 1] = params.end.data
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(A + (e[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(emissions, params):
    """log of the total exp-score over all K^T label sequences."""
    e = _emissions_array(emissions)
    alpha = _forward(e, params)
    return float(_logsumexp(alpha[-1] + params.end.data))


def marginals(emissions, params):
    """Per-position label probabilities P(y_t = k); rows sum to one."""
    e = _emissions_array(emissions)
    alpha = _forward(e, params)
    beta = _backward(e, params)
    log_z = _logsumexp(alpha[-1] + params.end.data)
    return np.exp(alpha + beta - log_z)


def pairwise_marginals(emissions, params):
    """P(y_t = i, y_{t+1} = j) for t in [0, T-1); shape (T-1, K, K)."""
    e = _emissions_array(emissions)
    T, K = e.shape
    if T < 2:
        return np.zeros((0, K, K))
    A = params.transitions.data
    alpha = _forward(e, params)
    beta = _backward(e, params)
    log_z = _logsumexp(alpha[-1] + params.end.data)
    pair = np.empty((T - 1, K, K))
    for t in range(T - 1):
        pair[t] = np.exp(alpha[t][:, None] + A + (e[t + 1] + beta[t + 1])[None, :] - log_z)
    return pair


def viterbi_decode(emissions, params):
    """Highest-scoring label sequence and its score.

    Ties break toward the lowest label id at every backtracking step
    (argmax returns the first maximum), so decoding is deterministic.
    """
    e = _emissions_array(emissions)
    T, K = e.shape
    A = params.transitions.data
    score = params.start.data + e[0]
    backptr = np.zeros((T, K), dtype=np.intp)
    for t in range(1, T):
        cand = score[:, None] + A  # (prev, next)
        backptr[t] = np.argmax(cand, axis=0)
        score = cand[backptr[t], np.arange(K)] + e[t]
    final = score + params.end.data
    best = int(np.argmax(final))
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(backptr[t, best])
        path.append(best)
    path.reverse()
    return path, float(final[path[-1]])


def crf_nll(emissions, labels, params):
    """Differentiable negative log-likelihood: log Z minus the gold score.

    Gradients: for emissions, marginals minus the gold one-hots; for the
    transition table, expected pair counts minus observed; for start/end,
    first/last marginals minus the gold one-hots.
    """
    if not isinstance(emissions, Tensor):
        emissions = Tensor(emissions)
    e = _emissions_array(emissions)
    T, K = e.shape
    y = _check_labels(labels, T, K)
    gold = sequence_score(e, y, params)
    node_marg = marginals(e, params)
    pair_marg = pairwise_marginals(e, params)
    alpha = _forward(e, params)
    log_z = float(_logsumexp(alpha[-1] + params.end.data))
    loss = log_z - gold

    def backward(g):
        g = float(g)
        grad_e = node_marg.copy()
        for t, label in enumerate(y):
            grad_e[t, label] -= 1.0
        emissions._accumulate(grad_e * g)

        grad_a = pair_marg.sum(axis=0)
        for t in range(1, T):
            grad_a[y[t - 1], y[t]] -= 1.0
        params.transitions._accumulate(grad_a * g)

        grad_start = node_marg[0].copy()
        grad_start[y[0]] -= 1.0
        params.start._accumulate(grad_start * g)

        grad_end = node_marg[-1].copy()
        grad_end[y[-1]] -= 1.0
        params.end._accumulate(grad_end * g)

    parents = (emissions, params.transitions, params.start, params.end)
    return _result(np.float64(loss), parents, backward, "crf_nll")
