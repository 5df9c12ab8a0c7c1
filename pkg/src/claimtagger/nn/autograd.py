"""Reverse-mode automatic differentiation over dense float64 arrays.

The graph is built eagerly: each operation records its input tensors and a
closure that routes the output gradient back to them.  Only the primitives
needed by the sentence taggers are provided (matmul, add, mul, concat,
tanh, sigmoid, softmax cross-entropy, embedding lookup, slicing, dropout).
Everything runs on CPU numpy in double precision, single threaded, so a
fixed seed gives identical results across runs.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, NumericError


class Tensor:
    """Dense float64 array plus the bookkeeping for backpropagation."""

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self._non_scalar()

    def _non_scalar(self):
        raise ContractError(f"item() requires a scalar tensor, got shape {self.data.shape}")

    def detach(self):
        return Tensor(self.data.copy())

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Backpropagate from a scalar loss to every reachable tensor.

        Frozen leaves (requires_grad false) receive no gradient; by
        convention a grad of None means zero.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() requires a scalar loss, got shape {self.data.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        # iterative DFS: token-level graphs get deep enough to overflow recursion
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def sum(self):
        return tsum(self)

    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        flags = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flags})"


class Parameter(Tensor):
    """A named, trainable leaf tensor.

    Setting ``trainable`` to False freezes the value: no gradient is
    accumulated and optimizers skip the update, so the bytes are identical
    before and after any training step.
    """

    def __init__(self, data, name, trainable=True):
        super().__init__(data, requires_grad=trainable)
        self.name = str(name)

    @property
    def trainable(self):
        return self.requires_grad

    @trainable.setter
    def trainable(self, flag):
        self.requires_grad = bool(flag)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape}, trainable={self.trainable})"


def _as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data, parents, backward, op):
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by {op}")
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _result(a.data + b.data, (a, b), backward, "add")


def neg(a):
    def backward(g):
        a._accumulate(-g)

    return _result(-a.data, (a,), backward, "neg")


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _result(a.data * b.data, (a, b), backward, "mul")


def scale(a, factor):
    factor = float(factor)

    def backward(g):
        a._accumulate(g * factor)

    return _result(a.data * factor, (a,), backward, "scale")


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ContractError("matmul supports 1-D and 2-D operands only")

    def backward(g):
        if a.data.ndim == 2 and b.data.ndim == 1:
            a._accumulate(np.outer(g, b.data))
            b._accumulate(a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 2:
            a._accumulate(b.data @ g)
            b._accumulate(np.outer(a.data, g))
        elif a.data.ndim == 1 and b.data.ndim == 1:
            a._accumulate(g * b.data)
            b._accumulate(g * a.data)
        else:
            a._accumulate(g @ b.data.T)
            b._accumulate(a.data.T @ g)

    return _result(a.data @ b.data, (a, b), backward, "matmul")


def tanh(a):
    out_data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return _result(out_data, (a,), backward, "tanh")


def sigmoid(a):
    # stable in both tails
    out_data = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                        np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def backward(g):
        a._accumulate(g * out_data * (1.0 - out_data))

    return _result(out_data, (a,), backward, "sigmoid")


def tsum(a):
    def backward(g):
        a._accumulate(np.full_like(a.data, float(g)))

    return _result(a.data.sum(), (a,), backward, "sum")


def mean_of(tensors):
    """Arithmetic mean of a list of scalar tensors."""
    if not tensors:
        raise ContractError("mean_of requires at least one tensor")
    total = tensors[0]
    for t in tensors[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(tensors))


def concat(parts, axis=0):
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ContractError("concat requires at least one tensor")
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            part._accumulate(g[tuple(index)])

    return _result(np.concatenate([p.data for p in parts], axis=axis), parts, backward, "concat")


def stack_rows(rows):
    """Stack 1-D tensors of equal length into a 2-D tensor, one per row."""
    rows = [_as_tensor(r) for r in rows]
    if not rows:
        raise ContractError("stack_rows requires at least one row")

    def backward(g):
        for i, row in enumerate(rows):
            row._accumulate(g[i])

    return _result(np.stack([r.data for r in rows]), rows, backward, "stack_rows")


def narrow(a, start, length):
    """View rows [start, start+length) along the first axis."""
    stop = start + length
    if start < 0 or stop > a.data.shape[0]:
        raise ContractError("narrow out of range")

    def backward(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        a._accumulate(full)

    return _result(a.data[start:stop].copy(), (a,), backward, "narrow")


def embedding_lookup(table, ids):
    """Gather rows of ``table`` (V x D) for a list of token ids."""
    ids = list(ids)
    if not ids:
        raise ContractError("embedding_lookup requires at least one id")
    vocab_size = table.data.shape[0]
    for i in ids:
        if not 0 <= i < vocab_size:
            raise ContractError(f"token id {i} out of range [0, {vocab_size})")
    idx = np.asarray(ids, dtype=np.intp)

    def backward(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    return _result(table.data[idx], (table,), backward, "embedding_lookup")


def softmax_cross_entropy(logits, target):
    """Cross-entropy of a single gold class against 1-D logits.

    The gradient with respect to the logits is softmax(logits) - onehot.
    """
    z = logits.data
    if z.ndim != 1:
        raise ContractError("softmax_cross_entropy expects 1-D logits")
    if not 0 <= target < z.shape[0]:
        raise ContractError(f"target class {target} out of range [0, {z.shape[0]})")
    m = z.max()
    exps = np.exp(z - m)
    probs = exps / exps.sum()
    loss = m + np.log(exps.sum()) - z[target]

    def backward(g):
        grad = probs.copy()
        grad[target] -= 1.0
        logits._accumulate(grad * float(g))

    return _result(loss, (logits,), backward, "softmax_cross_entropy")


def log_softmax(a):
    """Row-wise log-softmax of a 1-D or 2-D tensor."""
    z = a.data
    m = z.max(axis=-1, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out_data = shifted - lse
    soft = np.exp(out_data)

    def backward(g):
        a._accumulate(g - soft * g.sum(axis=-1, keepdims=True))

    return _result(out_data, (a,), backward, "log_softmax")


def dropout(a, rate, rng):
    """Inverted dropout; identity when rate is zero."""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)

    def backward(g):
        a._accumulate(g * mask)

    return _result(a.data * mask, (a,), backward, "dropout")


def softmax_probs(logits):
    """Plain-numpy softmax of a 1-D array (no graph)."""
    z = np.asarray(logits, dtype=np.float64)
    m = z.max()
    e = np.exp(z - m)
    return e / e.sum()


def xavier_uniform(shape, rng, fan_in=None, fan_out=None):
    """Xavier/Glorot uniform init; fans default to the matrix dimensions."""
    if fan_in is None:
        fan_in = shape[-1] if len(shape) > 1 else shape[0]
    if fan_out is None:
        fan_out = shape[0] if len(shape) > 1 else shape[0]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
