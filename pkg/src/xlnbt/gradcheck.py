"""Central-difference gradient checking against the autodiff engine."""

from __future__ import annotations

import math

import numpy as np


def grad_check(loss_fn, params, eps=1e-6, names=None):
    """Return the worst relative error between analytic and numeric gradients.

    ``loss_fn`` maps a parameter binding (dict of name -> Var, as produced
    by ``params.bind()``) to a scalar Var. The analytic gradient comes from
    one reverse pass; the numeric one from central differences on every
    element of the checked entries (all trainable entries by default).

    Relative error per element: |a - n| / max(|a|, |n|, 1e-8).
    """
    binding = params.bind()
    out = loss_fn(binding)
    if not math.isfinite(float(out.data)):
        raise ValueError("non-finite loss value at the evaluation point")
    out.backward()
    analytic = {
        n: (binding[n].grad if binding[n].grad is not None else np.zeros_like(params[n]))
        for n in (names or params.trainable_names())
    }

    worst = 0.0
    for name in analytic:
        arr = params[name]
        flat = arr.reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(loss_fn(params.bind()).data)
            flat[i] = orig - eps
            f_minus = float(loss_fn(params.bind()).data)
            flat[i] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise ValueError("non-finite loss value during perturbation")
            numeric = (f_plus - f_minus) / (2 * eps)
            a = grad_flat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
