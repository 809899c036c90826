"""Parameter update rules working on named tensors with .grad set."""

from __future__ import annotations

import numpy as np


class AdamW:
    """Adam with decoupled weight decay.

    The decay is applied directly to the parameters, scaled by the effective
    learning rate, not mixed into the gradient moments.
    """

    def __init__(self, params: dict, lr: float, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr_scale: float = 1.0):
        self.t += 1
        lr = self.lr * lr_scale
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= lr * update + lr * self.weight_decay * p.data

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


class SGD:
    """Plain gradient steps; ``maximize`` flips them into ascent."""

    def __init__(self, params: dict, lr: float, maximize: bool = False):
        self.params = params
        self.lr = lr
        self.sign = 1.0 if maximize else -1.0

    def step(self, lr_scale: float = 1.0):
        for p in self.params.values():
            if p.grad is not None:
                p.data += self.sign * self.lr * lr_scale * p.grad

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
