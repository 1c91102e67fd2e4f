from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-4,
    n_coords: int = 100,
    seed: int = 0,
    floor: float = 1e-8,
) -> dict[str, float]:
    """Compare backprop gradients with central differences.

    Returns the max relative error per parameter, measured on up to
    ``n_coords`` randomly chosen coordinates of each parameter. The relative
    error of one coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        k = min(n_coords, flat.size)
        coords = rng.choice(flat.size, size=k, replace=False)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            up = float(loss_fn().data)
            flat[c] = orig - h
            down = float(loss_fn().data)
            flat[c] = orig
            numeric = (up - down) / (2.0 * h)
            a = float(analytic[name].reshape(-1)[c])
            denom = max(abs(a), abs(numeric), floor)
            worst = max(worst, abs(a - numeric) / denom)
        errors[name] = worst
    return errors
