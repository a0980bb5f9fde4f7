"""Vector-quantisation bottleneck with a straight-through estimator."""
from __future__ import annotations

import numpy as np

from textless.nn.layers import Module, Param


def nearest_codes(codebook, z):
    """Index of the nearest codebook row for every row of z (ties -> lowest index)."""
    if codebook.shape[0] == 0:
        raise ValueError("empty codebook")
    if z.shape[-1] != codebook.shape[1]:
        raise ValueError(f"dimension mismatch: z has {z.shape[-1]}, codebook {codebook.shape[1]}")
    flat = z.reshape(-1, z.shape[-1])
    idx = np.empty(len(flat), dtype=np.int64)
    chunk = max(1, 2 ** 22 // max(1, codebook.size))
    for s in range(0, len(flat), chunk):
        d = ((flat[s : s + chunk, None, :] - codebook[None, :, :]) ** 2).sum(axis=-1)
        idx[s : s + chunk] = np.argmin(d, axis=1)
    return idx.reshape(z.shape[:-1])


def vq_quantize(codebook, z, beta=0.25):
    """Quantise z [T, d]; returns (z_q, indices, vq_loss, commit_loss).

    Both losses are squared distances summed over the feature axis and
    averaged over rows; the commitment term is scaled by beta.
    """
    z = np.asarray(z)
    idx = nearest_codes(codebook, z)
    z_q = codebook[idx]
    sq = ((z - z_q) ** 2).reshape(-1, z.shape[-1]).sum(axis=1).mean()
    return z_q, idx, float(sq), float(beta * sq)


class VectorQuantizer(Module):
    def __init__(self, n_codes, dim, rng, beta=0.25, dtype=np.float32, dead_after=200):
        self.codebook = Param(rng.uniform(-0.5, 0.5, size=(n_codes, dim)).astype(dtype))
        self.beta = beta
        self.dead_after = dead_after
        self.usage = np.zeros(n_codes, dtype=np.int64)
        self.idle = np.zeros(n_codes, dtype=np.int64)
        self._cache = None

    @property
    def n_codes(self):
        return self.codebook.shape[0]

    def forward(self, z):
        z_q, idx, vq_loss, commit = vq_quantize(self.codebook.data, z, self.beta)
        self._cache = (z, z_q, idx)
        return z_q, idx, vq_loss, commit

    def backward(self, g_zq, weight=1.0):
        """Straight-through: g_zq passes to z unchanged, plus the commitment gradient.

        The codebook receives the gradient of the vq loss (scaled by weight).
        """
        z, z_q, idx = self._cache
        d = z.shape[-1]
        rows = z.reshape(-1, d).shape[0]
        diff = (z - z_q).reshape(-1, d)
        np.add.at(self.codebook.grad, idx.reshape(-1), (-2.0 * weight / rows) * diff)
        return g_zq + (2.0 * weight * self.beta / rows) * (z - z_q)

    def update_usage(self, idx, z=None, rng=None):
        """Track code usage and re-seed codes idle for ``dead_after`` steps from z rows."""
        used = np.bincount(np.asarray(idx).reshape(-1), minlength=self.n_codes)
        self.usage += used
        self.idle = np.where(used > 0, 0, self.idle + 1)
        dead = np.nonzero(self.idle >= self.dead_after)[0]
        if len(dead) and z is not None and rng is not None:
            flat = z.reshape(-1, z.shape[-1])
            pick = rng.integers(0, len(flat), size=len(dead))
            self.codebook.data[dead] = flat[pick]
            self.idle[dead] = 0
        return dead
