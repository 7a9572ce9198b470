"""Gradient-descent optimizers acting on a ParameterSet in place."""

from __future__ import annotations

import numpy as np

from .autodiff import check_finite


class _Optimizer:
    def step(self, params, grads):
        """Apply one update. Gradient names must be trainable entries."""
        for name in grads:
            if name not in params:
                raise KeyError(f"gradient for unknown parameter {name!r}")
            if not params.trainable(name):
                raise ValueError(f"gradient for frozen parameter {name!r}")
        self._apply(params, grads)
        return params

    def _apply(self, params, grads):
        raise NotImplementedError


class SGD(_Optimizer):
    def __init__(self, lr=1e-3):
        self.lr = lr

    def _apply(self, params, grads):
        for name, g in grads.items():
            check_finite(g, f"gradient {name!r}")
            params.set(name, params[name] - self.lr * np.asarray(g))


class Adam(_Optimizer):
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {}
        self._v = {}
        self._t = {}

    def _apply(self, params, grads):
        for name, g in grads.items():
            g = np.asarray(g, dtype=np.float64)
            check_finite(g, f"gradient {name!r}")
            t = self._t.get(name, 0) + 1
            m = self.beta1 * self._m.get(name, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self._v.get(name, 0.0) + (1 - self.beta2) * g * g
            self._t[name], self._m[name], self._v[name] = t, m, v
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            params.set(name, params[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))


def make_optimizer(method, lr):
    if method == "sgd":
        return SGD(lr=lr)
    if method == "adam":
        return Adam(lr=lr)
    raise ValueError(f"unknown optimizer method {method!r}")


def optimizer_step(params, grads, lr=1e-3, method="sgd", optimizer=None):
    """One-shot functional step; pass an optimizer to keep Adam state."""
    opt = optimizer if optimizer is not None else make_optimizer(method, lr)
    return opt.step(params, grads)
