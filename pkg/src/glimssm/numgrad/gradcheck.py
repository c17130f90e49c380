"""Finite-difference gradient oracle."""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor


class NondeterministicFunction(RuntimeError):
    """Raised when the function under test is not replay-stable."""


def fd_gradient_check(f, params, eps=1e-5, max_coords=200, seed=0):
    """Max relative error between analytic and central-difference gradients.

    `f` is a zero-argument callable returning a scalar Tensor computed from
    `params` (a list of leaf Tensors).  It must be deterministic: two
    evaluations with untouched params have to agree bitwise.  At most
    `max_coords` coordinates are sampled across all params.

    Error metric per coordinate:
        |analytic - central| / (|central| + 1e-12)
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    v1 = f()
    v2 = f()
    if not isinstance(v1, Tensor) or v1.data.size != 1:
        raise ValueError("f must return a scalar Tensor")
    if v1.data.reshape(()) != v2.data.reshape(()):
        raise NondeterministicFunction(
            "f returned different values on identical inputs")

    with Tape() as tape:
        loss = f()
    grads = tape.gradients(loss, params)

    coords = [(i, j) for i, p in enumerate(params)
              for j in range(p.data.size)]
    rng = np.random.default_rng(seed)
    if len(coords) > max_coords:
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[int(k)] for k in picks]

    worst = 0.0
    for i, j in coords:
        p = params[i]
        orig = p.data.flat[j]
        p.data.flat[j] = orig + eps
        f_plus = f().item()
        p.data.flat[j] = orig - eps
        f_minus = f().item()
        p.data.flat[j] = orig
        central = (f_plus - f_minus) / (2.0 * eps)
        err = abs(float(grads[i].flat[j]) - central) / (abs(central) + 1e-12)
        worst = max(worst, err)
    return worst
