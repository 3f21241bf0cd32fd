"""Decoupled-weight-decay Adam and the single-cycle learning-rate schedule."""

from __future__ import annotations

import numpy as np


class OneCycleSchedule:
    """Linear warmup to one peak, cosine anneal to near zero.

    The maximum over epochs equals `peak` exactly (hit at the end of
    warmup); the final epoch's rate is peak / final_div.
    """

    def __init__(self, peak: float, total_epochs: int, warmup_fraction: float = 0.3,
                 start_div: float = 25.0, final_div: float = 1e4):
        if peak <= 0 or total_epochs < 1:
            raise ValueError("peak and total_epochs must be positive")
        if not 0.0 < warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must be in (0, 1)")
        self.peak = float(peak)
        self.total = int(total_epochs)
        self.warmup = min(max(1, round(warmup_fraction * self.total)), self.total - 1) \
            if self.total > 1 else 0
        self.start_div = float(start_div)
        self.final_div = float(final_div)

    def rate(self, epoch: int) -> float:
        e = min(max(epoch, 0), self.total - 1)
        if self.total == 1 or e == self.warmup:
            return self.peak
        if e < self.warmup:
            lo = self.peak / self.start_div
            return lo + (self.peak - lo) * e / self.warmup
        span = self.total - 1 - self.warmup
        frac = (e - self.warmup) / span
        lo = self.peak / self.final_div
        return lo + (self.peak - lo) * 0.5 * (1.0 + np.cos(np.pi * frac))


class AdamW:
    """Adam with decoupled weight decay.

    With a zero gradient one step shrinks a decayed parameter by exactly
    (1 - lr * weight_decay); moments stay untouched by the decay term.
    """

    def __init__(self, params: list[np.ndarray], decay_flags: list[bool] | None = None,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = params
        self.decay_flags = decay_flags if decay_flags is not None else [True] * len(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, g, m, v, decay in zip(self.params, grads, self.m, self.v, self.decay_flags):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if decay and self.weight_decay:
                p *= 1.0 - lr * self.weight_decay
            p -= lr * update
