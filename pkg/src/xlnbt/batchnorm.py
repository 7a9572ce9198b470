"""Batch normalization with running statistics and train/infer modes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Var, as_var, sqrt, vmean


@dataclass
class BatchNormState:
    """Per-dimension running statistics. Population (biased) variance."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    def __post_init__(self):
        self.running_mean = np.asarray(self.running_mean, dtype=np.float64)
        self.running_var = np.asarray(self.running_var, dtype=np.float64)
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if np.any(self.running_var < 0):
            raise ValueError("running variance must be non-negative")

    @classmethod
    def fresh(cls, dim, momentum=0.1, eps=1e-5):
        return cls(np.zeros(dim), np.ones(dim), momentum, eps)

    def copy(self):
        return BatchNormState(
            self.running_mean.copy(), self.running_var.copy(), self.momentum, self.eps
        )


def batch_norm(batch, state, mode):
    """Normalize a batch of H-vectors.

    Train mode computes batch statistics (requires batch size >= 2),
    updates the running stats in place, and is differentiable through
    the statistics. Infer mode normalizes by the stored running stats
    and leaves the state untouched.

    Accepts either a list of 1-D vectors (returns a list of ndarrays)
    or a (B, H) Var/array (returns a Var).
    """
    as_list = isinstance(batch, (list, tuple))
    if as_list:
        x = as_var(np.stack([np.asarray(v, dtype=np.float64) for v in batch]))
    else:
        x = as_var(batch)
    if x.data.ndim != 2:
        raise ValueError("batch_norm expects a (B, H) batch")

    if mode == "train":
        if x.data.shape[0] < 2:
            raise ValueError("train-mode batch_norm needs a batch of size >= 2")
        mean = vmean(x, axis=0, keepdims=True)
        centered = x - mean
        var = vmean(centered * centered, axis=0, keepdims=True)
        out = centered / sqrt(var + state.eps)
        m = state.momentum
        state.running_mean = (1.0 - m) * state.running_mean + m * mean.data.ravel()
        state.running_var = (1.0 - m) * state.running_var + m * var.data.ravel()
    elif mode == "infer":
        out = (x - state.running_mean) / np.sqrt(state.running_var + state.eps)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if as_list:
        return [row for row in out.data]
    return out
