"""Shared test utilities: the central finite-difference gradient oracle."""

import numpy as np

from dropgen.tensor import Tensor


def finite_diff_check(make_loss, tensors, eps=1e-5, max_checks=25, seed=0):
    """Compare reverse-mode gradients of a scalar loss against central finite
    differences. `make_loss` rebuilds the loss from the current tensor data
    (64-bit inputs expected). Returns the max relative error observed."""
    loss = make_loss()
    for t in tensors:
        t.grad = None
    loss.backward()
    grads = [t.grad.copy() for t in tensors]
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    for t, g in zip(tensors, grads):
        flat = t.data.ravel()
        n = min(max_checks, flat.size)
        for i in rng.choice(flat.size, size=n, replace=False):
            old = flat[i]
            flat[i] = old + eps
            lp = float(make_loss().data)
            flat[i] = old - eps
            lm = float(make_loss().data)
            flat[i] = old
            numeric = (lp - lm) / (2 * eps)
            denom = max(abs(numeric), abs(g.ravel()[i]), 1e-8)
            max_rel = max(max_rel, abs(numeric - g.ravel()[i]) / denom)
    return max_rel


def rand_tensor(rng, shape, requires_grad=True):
    return Tensor(rng.normal(size=shape), requires_grad=requires_grad)
