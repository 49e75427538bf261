"""Central finite-difference checking of autodiff gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .engine import ContractError, NumericalError, Tensor


def relative_error(g_auto: float, g_fd: float) -> float:
    return abs(g_auto - g_fd) / max(1e-8, abs(g_auto) + abs(g_fd))


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    max_coords_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between autodiff and central differences.

    ``f`` rebuilds the forward graph from the current parameter values on
    every call; any sampling inside must be re-seeded per call so the check
    differentiates a fixed realization. ``max_coords_per_param`` limits the
    probed coordinates per parameter (chosen with ``rng``) to bound runtime;
    by default every coordinate is probed.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ContractError(f"grad_check: eps {eps} outside [1e-7, 1e-3]")
    for p in params:
        p.grad = None
    loss = f()
    loss.backward()
    grads = [np.zeros_like(p.value) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for pi, p in enumerate(params):
        flat = p.value.reshape(-1)
        n = flat.size
        coords = range(n)
        if max_coords_per_param is not None and n > max_coords_per_param:
            gen = rng if rng is not None else np.random.default_rng(0)
            coords = gen.choice(n, size=max_coords_per_param, replace=False)
        ga_flat = grads[pi].reshape(-1)
        for ci in coords:
            orig = flat[ci]
            flat[ci] = orig + eps
            up = f().item()
            flat[ci] = orig - eps
            down = f().item()
            flat[ci] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericalError(
                    f"grad_check: non-finite probe at parameter {pi}, coordinate {ci}"
                )
            g_fd = (up - down) / (2 * eps)
            worst = max(worst, relative_error(ga_flat[ci], g_fd))
    return worst
