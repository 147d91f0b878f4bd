"""Adam-style optimizer with global-norm gradient clipping."""

from __future__ import annotations

import numpy as np


class GradientError(RuntimeError):
    """Raised when a parameter carries a non-finite gradient."""


class OptimizerState:
    """Per-parameter moment accumulators plus the shared step counter."""

    def __init__(self, params, learning_rate=1e-3, clip_norm=5.0,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.clip_norm = clip_norm
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def zero_grads(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        """Clip, apply the Adam update, bump the counter, zero the gradients."""
        for p in self.params:
            if p.grad is None:
                continue
            if not np.all(np.isfinite(p.grad)):
                raise GradientError(f"non-finite gradient in parameter {p.name!r}")
        total = 0.0
        for p in self.params:
            if p.grad is not None:
                total += float((p.grad * p.grad).sum())
        norm = np.sqrt(total)
        factor = self.clip_norm / norm if (self.clip_norm and norm > self.clip_norm) else 1.0
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.params):
            g = (p.grad if p.grad is not None else np.zeros_like(p.values)) * factor
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.values -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        self.zero_grads()
