"""Shared oracles for the test-suite."""
import numpy as np

from finer.net import backward, forward


def linear_loss(mlp, x, r):
    """``sum(r * f(x))``: its output gradient is exactly ``r``."""
    return float(np.sum(r * forward(mlp, x, keep_cache=False)[0]))


def gradient_check(mlp, x, rng, h=1e-6, rel=1e-6, abs_floor=1e-9):
    """Compare backprop against central differences for every parameter.

    Returns ``(worst_ratio, count)``, where a ratio <= 1 means that entry is
    within ``max(rel * |g|, abs_floor)``.
    """
    out, cache = forward(mlp, x)
    r = rng.normal(size=out.shape)
    grads = backward(mlp, cache, r)
    worst, count = 0.0, 0
    for p, g in zip(mlp.params(), grads.params()):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = linear_loss(mlp, x, r)
            flat_p[i] = orig - h
            down = linear_loss(mlp, x, r)
            flat_p[i] = orig
            fd = (up - down) / (2.0 * h)
            tol = max(rel * abs(flat_g[i]), abs_floor)
            worst = max(worst, abs(fd - flat_g[i]) / tol)
            count += 1
    return worst, count
