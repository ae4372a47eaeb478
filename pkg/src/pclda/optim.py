"""Plain Adam on a dict of numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8


class Adam:
    """Standard Adam with bias correction.

    update: m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
            theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """

    def __init__(self, params: dict, cfg: AdamConfig = AdamConfig()):
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> dict:
        cfg = self.cfg
        self.t += 1
        out = {}
        for k, theta in params.items():
            g = grads[k]
            self.m[k] = cfg.beta1 * self.m[k] + (1 - cfg.beta1) * g
            self.v[k] = cfg.beta2 * self.v[k] + (1 - cfg.beta2) * g * g
            m_hat = self.m[k] / (1 - cfg.beta1 ** self.t)
            v_hat = self.v[k] / (1 - cfg.beta2 ** self.t)
            out[k] = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_hat)
        return out
