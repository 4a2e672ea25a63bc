"""Adam updates, the weighted BCE head, and the finite-difference
gradient checker used across the test suite."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    """Per-key Adam with bias correction; updates arrays in place."""

    def __init__(self, config=None):
        self.config = config or AdamConfig()
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        cfg = self.config
        self.t += 1
        b1t = 1.0 - cfg.beta1 ** self.t
        b2t = 1.0 - cfg.beta2 ** self.t
        for key, p in params.items():
            g = grads[key]
            if g.shape != p.shape:
                raise ValueError(f"{key}: gradient shape {g.shape} != param {p.shape}")
            m = self.m.setdefault(key, np.zeros_like(p))
            v = self.v.setdefault(key, np.zeros_like(p))
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= cfg.lr * (m / b1t) / (np.sqrt(v / b2t) + cfg.eps)


def bce_with_logits(logit, label, weight=1.0):
    """Weighted binary cross-entropy on a pre-sigmoid logit.

    loss = -weight * [y*log(sigmoid(z)) + (1-y)*log(1-sigmoid(z))]
    evaluated in the stable softplus form; returns (loss, dloss/dz).
    """
    z = float(logit)
    y = float(label)
    # softplus(z) - y*z, with softplus(z) = max(z,0) + log1p(exp(-|z|))
    loss = weight * (max(z, 0.0) + math.log1p(math.exp(-abs(z))) - y * z)
    sig = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
    return loss, weight * (sig - y)


def grad_check(model, x, h=1e-3):
    """Worst-case relative error between analytic and central-difference
    parameter gradients of the model's logit. Reports, never raises."""
    _, _ = model.forward(x)
    analytic, _ = model.backward(1.0)
    params = model.named_params()
    worst = 0.0
    for key, p in params.items():
        flat = p.reshape(-1)
        a_flat = analytic[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _ = model.forward(x)
            flat[i] = orig - h
            dn, _ = model.forward(x)
            flat[i] = orig
            numeric = (up - dn) / (2.0 * h)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    # restore caches to the unperturbed point
    model.forward(x)
    model.backward(1.0)
    return worst
