"""Adam optimizer, reduce-on-plateau scheduling, and gradient clipping."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError
from .autograd import Parameter


class Adam:
    """Adam with bias correction, applied to trainable parameters only.

    Frozen parameters are skipped entirely, so their values stay
    bit-identical across steps.  The step count still advances once per
    call, shared by all parameters.
    """

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ContractError("parameter names must be unique within one optimizer")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {p.name: np.zeros_like(p.data) for p in self.params}
        self._v = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p in self.params:
            if not p.trainable:
                continue
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ContractError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{p.name!r} shape {p.data.shape}")
            m = self._m[p.name]
            v = self._v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class PlateauScheduler:
    """Halve (by ``factor``) the learning rate when a loss stops improving.

    The metric is "lower is better".  An observation improves when it beats
    the best seen so far by more than ``tol``; NaN never counts as an
    improvement.  After more than ``patience`` consecutive non-improving
    observations the rate is multiplied by ``factor`` and clamped at
    ``min_lr``.  The rate never increases.
    """

    def __init__(self, lr, factor=0.5, patience=2, tol=1e-4, min_lr=1e-6):
        if lr <= 0:
            raise ContractError(f"initial lr must be positive, got {lr}")
        if not 0.0 < factor < 1.0:
            raise ContractError(f"factor must be in (0, 1), got {factor}")
        self.current_lr = lr
        self.factor = factor
        self.patience = patience
        self.tol = tol
        self.min_lr = min_lr
        self.best_metric = math.inf
        self.epochs_since_best = 0

    def observe(self, metric):
        improved = math.isfinite(metric) and metric < self.best_metric - self.tol
        if improved:
            self.best_metric = metric
            self.epochs_since_best = 0
        else:
            self.epochs_since_best += 1
            if self.epochs_since_best > self.patience:
                self.current_lr = max(self.current_lr * self.factor, self.min_lr)
                self.epochs_since_best = 0
        return self.current_lr


def clip_global_norm(params, max_norm):
    """Scale all trainable gradients so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    grads = []
    for p in params:
        if isinstance(p, Parameter) and not p.trainable:
            continue
        if p.grad is not None:
            grads.append(p.grad)
            total += float((p.grad * p.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm > 0:
        ratio = max_norm / norm
        for g in grads:
            g *= ratio
    return norm
