"""Finite-difference gradient checking for the hand-written layers."""
import numpy as np


def _rel_err(a, n, floor=1e-8):
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def _coords(size, rng, max_coords):
    if max_coords is None or size <= max_coords:
        return np.arange(size)
    return rng.choice(size, size=max_coords, replace=False)


def grad_check(module, input_sampler, eps=1e-5, seed=0, max_coords=None, check_input=True):
    """Max relative error between backward and central differences.

    The scalar objective is ``sum(forward(x) * R)`` for a fixed random R, so
    the upstream gradient is R. ``max_coords`` caps how many coordinates of
    each tensor are probed (a random subset, at least 200 when capped).
    Parameters must already be float64.
    """
    rng = np.random.default_rng(seed)
    x = input_sampler(rng)
    y = module.forward(x)
    r = rng.normal(size=np.shape(y))
    if max_coords is not None:
        max_coords = max(200, max_coords)

    def objective():
        return float(np.sum(module.forward(x) * r))

    module.zero_grad()
    module.forward(x)
    dx = module.backward(r)
    worst = 0.0
    for p in module.params():
        analytic = p.grad.copy().reshape(-1)
        flat = p.data.reshape(-1)
        idx = _coords(flat.size, rng, max_coords)
        numeric = np.empty(len(idx))
        for n, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + eps
            up = objective()
            flat[i] = old - eps
            down = objective()
            flat[i] = old
            numeric[n] = (up - down) / (2 * eps)
        worst = max(worst, _rel_err(analytic[idx], numeric))
    if check_input and dx is not None and np.issubdtype(np.asarray(x).dtype, np.floating):
        flat = x.reshape(-1)
        idx = _coords(flat.size, rng, max_coords)
        numeric = np.empty(len(idx))
        for n, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + eps
            up = objective()
            flat[i] = old - eps
            down = objective()
            flat[i] = old
            numeric[n] = (up - down) / (2 * eps)
        worst = max(worst, _rel_err(dx.reshape(-1)[idx], numeric))
    return worst
