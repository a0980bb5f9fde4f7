"""Layers with hand-written backward passes.

Each layer caches what its backward needs during ``forward``; ``backward``
consumes the cache of the most recent forward, accumulates parameter
gradients into ``Param.grad`` and returns the gradient wrt the input.
"""
from __future__ import annotations

import numpy as np


class Param:
    __slots__ = ("data", "grad")

    def __init__(self, data):
        self.data = data
        self.grad = np.zeros_like(data)

    @property
    def shape(self):
        return self.data.shape


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """Container of named parameters and child modules."""

    def named_params(self, prefix=""):
        out = {}
        for name, value in vars(self).items():
            if isinstance(value, Param):
                out[prefix + name] = value
            elif isinstance(value, Module):
                out.update(value.named_params(prefix + name + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_params(f"{prefix}{name}.{i}."))
        return out

    def params(self):
        return list(self.named_params().values())

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0

    def to(self, dtype):
        for p in self.params():
            p.data = p.data.astype(dtype)
            p.grad = np.zeros_like(p.data)
        return self

    def n_params(self):
        return sum(p.data.size for p in self.params())


class Linear(Module):
    """y = x W^T + b over the last axis."""

    def __init__(self, n_in, n_out, rng, dtype=np.float32, bias=True):
        self.W = Param(_uniform(rng, (n_out, n_in), n_in, dtype))
        self.b = Param(_uniform(rng, (n_out,), n_in, dtype)) if bias else None
        self._x = None

    def forward(self, x):
        if x.shape[-1] != self.W.shape[1]:
            raise ValueError(f"Linear expects last dim {self.W.shape[1]}, got {x.shape}")
        self._x = x
        y = x @ self.W.data.T
        if self.b is not None:
            y = y + self.b.data
        return y

    def backward(self, g):
        x = self._x
        x2 = x.reshape(-1, x.shape[-1])
        g2 = g.reshape(-1, g.shape[-1])
        self.W.grad += g2.T @ x2
        if self.b is not None:
            self.b.grad += g2.sum(axis=0)
        return g @ self.W.data


class Conv1d(Module):
    """Cross-correlation over [batch, C_in, T] with zero padding."""

    def __init__(self, c_in, c_out, k, rng, stride=1, padding=0, dtype=np.float32):
        fan_in = c_in * k
        self.W = Param(_uniform(rng, (c_out, c_in, k), fan_in, dtype))
        self.b = Param(_uniform(rng, (c_out,), fan_in, dtype))
        self.stride, self.padding, self.k = stride, padding, k
        self._cache = None

    def out_length(self, t):
        return (t + 2 * self.padding - self.k) // self.stride + 1

    def forward(self, x):
        b, c_in, t = x.shape
        if c_in != self.W.shape[1]:
            raise ValueError(f"Conv1d expects {self.W.shape[1]} channels, got {c_in}")
        if t + 2 * self.padding < self.k:
            raise ValueError(f"input length {t} too short for kernel {self.k}")
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        # cols: [b, c_in, t_out, k]
        cols = np.lib.stride_tricks.sliding_window_view(xp, self.k, axis=2)[:, :, :: self.stride]
        self._cache = (cols, xp.shape)
        y = np.einsum("bctk,ock->bot", cols, self.W.data, optimize=True)
        return y + self.b.data[None, :, None]

    def backward(self, g):
        cols, xp_shape = self._cache
        self.W.grad += np.einsum("bot,bctk->ock", g, cols, optimize=True)
        self.b.grad += g.sum(axis=(0, 2))
        dxp = np.zeros(xp_shape, dtype=g.dtype)
        t_out = g.shape[2]
        span = self.stride * (t_out - 1) + 1
        for j in range(self.k):
            dxp[:, :, j : j + span : self.stride] += np.einsum(
                "bot,oc->bct", g, self.W.data[:, :, j], optimize=True
            )
        p = self.padding
        return dxp[:, :, p : xp_shape[2] - p] if p else dxp


class Embedding(Module):
    def __init__(self, n, d, rng, dtype=np.float32, scale=None):
        bound = 1.0 if scale is None else scale
        self.E = Param(rng.uniform(-bound, bound, size=(n, d)).astype(dtype))
        self._idx = None

    def forward(self, idx):
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= self.E.shape[0]):
            raise IndexError(f"embedding index out of range [0, {self.E.shape[0]})")
        self._idx = idx
        return self.E.data[idx]

    def backward(self, g):
        idx = self._idx.reshape(-1)
        if idx.size == 0:
            return
        g = g.reshape(-1, g.shape[-1])
        order = np.argsort(idx, kind="stable")
        sorted_idx = idx[order]
        starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])
        self.E.grad[sorted_idx[starts]] += np.add.reduceat(g[order], starts, axis=0)


class LayerNorm(Module):
    """Normalisation over the last (channel) axis with learned gain and bias."""

    def __init__(self, d, dtype=np.float32, eps=1e-5):
        self.gain = Param(np.ones(d, dtype=dtype))
        self.bias = Param(np.zeros(d, dtype=dtype))
        self.eps = eps
        self._cache = None

    def forward(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + self.eps)
        xhat = xc * inv
        self._cache = (xhat, inv)
        return xhat * self.gain.data + self.bias.data

    def backward(self, g):
        xhat, inv = self._cache
        d = xhat.shape[-1]
        self.gain.grad += (g * xhat).reshape(-1, d).sum(axis=0)
        self.bias.grad += g.reshape(-1, d).sum(axis=0)
        gx = g * self.gain.data
        return inv * (gx - gx.mean(axis=-1, keepdims=True)
                      - xhat * (gx * xhat).mean(axis=-1, keepdims=True))


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class LSTMCell(Module):
    """Single LSTM step; gate order i, f, g, o in the stacked weights."""

    def __init__(self, n_in, hidden, rng, dtype=np.float32):
        self.hidden = hidden
        self.Wx = Param(_uniform(rng, (4 * hidden, n_in), hidden, dtype))
        self.Wh = Param(_uniform(rng, (4 * hidden, hidden), hidden, dtype))
        self.b = Param(_uniform(rng, (4 * hidden,), hidden, dtype))

    def step(self, x, h_prev, c_prev):
        """Forward one step; returns (h, c, cache)."""
        if x.shape[-1] != self.Wx.shape[1] or h_prev.shape[-1] != self.hidden:
            raise ValueError("LSTM input/state shape mismatch")
        a = x @ self.Wx.data.T + h_prev @ self.Wh.data.T + self.b.data
        hd = self.hidden
        i = sigmoid(a[:, :hd])
        f = sigmoid(a[:, hd : 2 * hd])
        gg = np.tanh(a[:, 2 * hd : 3 * hd])
        o = sigmoid(a[:, 3 * hd :])
        c = f * c_prev + i * gg
        tc = np.tanh(c)
        h = o * tc
        return h, c, (x, h_prev, c_prev, i, f, gg, o, tc)

    def step_backward(self, dh, dc, cache):
        """Backward one step; returns (dx, dh_prev, dc_prev)."""
        x, h_prev, c_prev, i, f, gg, o, tc = cache
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * gg
        df = dc * c_prev
        dg = dc * i
        da = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), dg * (1 - gg * gg), do * o * (1 - o)], axis=1
        )
        self.Wx.grad += da.T @ x
        self.Wh.grad += da.T @ h_prev
        self.b.grad += da.sum(axis=0)
        return da @ self.Wx.data, da @ self.Wh.data, dc * f

    def forward(self, x, h_prev, c_prev):
        h, c, self._cache = self.step(x, h_prev, c_prev)
        return h, c

    def backward(self, dh, dc):
        return self.step_backward(dh, dc, self._cache)


class LSTM(Module):
    """Unidirectional LSTM over [batch, T, in] with full BPTT."""

    def __init__(self, n_in, hidden, rng, dtype=np.float32):
        self.cell = LSTMCell(n_in, hidden, rng, dtype)
        self.hidden = hidden
        self._caches = None

    def forward(self, x, state=None):
        b, t, _ = x.shape
        dtype = self.cell.Wx.data.dtype
        if state is None:
            h = np.zeros((b, self.hidden), dtype=dtype)
            c = np.zeros((b, self.hidden), dtype=dtype)
        else:
            h, c = state
        out = np.empty((b, t, self.hidden), dtype=dtype)
        caches = []
        # input projection for all steps at once
        xw = x @ self.cell.Wx.data.T + self.cell.b.data
        Wh = self.cell.Wh.data.T
        hd = self.hidden
        for s in range(t):
            a = xw[:, s] + h @ Wh
            i = sigmoid(a[:, :hd])
            f = sigmoid(a[:, hd : 2 * hd])
            gg = np.tanh(a[:, 2 * hd : 3 * hd])
            o = sigmoid(a[:, 3 * hd :])
            c_prev = c
            c = f * c_prev + i * gg
            tc = np.tanh(c)
            h_prev = h
            h = o * tc
            out[:, s] = h
            caches.append((h_prev, c_prev, i, f, gg, o, tc))
        self._x = x
        self._caches = caches
        self.last_state = (h, c)
        return out

    def backward(self, g):
        x, caches = self._x, self._caches
        b, t, _ = x.shape
        hd = self.hidden
        dh = np.zeros((b, hd), dtype=g.dtype)
        dc = np.zeros((b, hd), dtype=g.dtype)
        da_all = np.empty((b, t, 4 * hd), dtype=g.dtype)
        Wh = self.cell.Wh.data
        for s in range(t - 1, -1, -1):
            h_prev, c_prev, i, f, gg, o, tc = caches[s]
            dh = dh + g[:, s]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            da = np.concatenate(
                [dc * gg * i * (1 - i), dc * c_prev * f * (1 - f),
                 dc * i * (1 - gg * gg), do * o * (1 - o)], axis=1
            )
            da_all[:, s] = da
            self.cell.Wh.grad += da.T @ h_prev
            dh = da @ Wh
            dc = dc * f
        flat = da_all.reshape(-1, 4 * hd)
        self.cell.Wx.grad += flat.T @ x.reshape(-1, x.shape[-1])
        self.cell.b.grad += flat.sum(axis=0)
        return da_all @ self.cell.Wx.data


class ReLU:
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, g):
        return g * self._mask


def softmax_xent(logits, target):
    """Mean cross-entropy over rows; returns (loss, dlogits)."""
    logits = np.asarray(logits)
    target = np.asarray(target)
    n = logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(logits)
    rows = np.arange(n)
    e = logits - logits.max(axis=1, keepdims=True)
    picked = e[rows, target]
    np.exp(e, out=e)
    s = e.sum(axis=1)
    loss = float(np.mean(np.log(s.astype(np.float64)) - picked))
    e *= (1.0 / (n * s))[:, None].astype(e.dtype)
    e[rows, target] -= 1.0 / n
    return loss, e


def log_softmax(logits, axis=-1):
    z = logits - logits.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
