"""Time-axis upsampling operators and the vocoder scale-chain rule.

Every operator acts on the last axis of an array (``[..., T]`` ->
``[..., s*T]``) and is linear, so each comes with its exact adjoint for
backpropagation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("nearest", "linear", "fourier_tile", "fourier_pad")


class ScaleChainError(ValueError):
    pass


@dataclass(frozen=True)
class ScaleChain:
    s1: int
    s2: int
    hop: int

    @property
    def total(self) -> int:
        return self.s1 * self.s2


def validate_scale_chain(chain: ScaleChain) -> ScaleChain:
    """Units arrive at half the frame rate, so s1*s2 must equal 2*hop."""
    if chain.s1 < 1 or chain.s2 < 1 or chain.hop < 1:
        raise ScaleChainError(f"scale factors and hop must be >= 1, got {chain}")
    expected = 2 * chain.hop
    if chain.s1 * chain.s2 != expected:
        raise ScaleChainError(
            f"scale chain {chain.s1}:{chain.s2} gives {chain.s1 * chain.s2}, but hop "
            f"{chain.hop} needs s1*s2 = 2*hop = {expected}"
        )
    return chain


def _check(s):
    if int(s) != s or s < 1:
        raise ValueError(f"scale factor must be a positive integer, got {s}")
    return int(s)


def upsample_nearest(x, s):
    s = _check(s)
    return np.repeat(np.asarray(x), s, axis=-1)


def upsample_nearest_adjoint(g, s):
    g = np.asarray(g)
    return g.reshape(g.shape[:-1] + (-1, s)).sum(axis=-1)


def _linear_weights(t, s):
    n = s * t
    if t == 1:
        return np.zeros(n, dtype=np.int64), np.zeros(n)
    # align-corners: output n maps to input position n*(t-1)/(n_out-1)
    pos = np.arange(n) * (t - 1) / (n - 1)
    idx = np.minimum(np.floor(pos).astype(np.int64), t - 2)
    return idx, pos - idx


def upsample_linear(x, s):
    s = _check(s)
    x = np.asarray(x)
    t = x.shape[-1]
    if t == 1 or s == 1:
        return upsample_nearest(x, s)
    idx, frac = _linear_weights(t, s)
    frac = frac.astype(x.dtype, copy=False)
    return x[..., idx] * (1 - frac) + x[..., idx + 1] * frac


def upsample_linear_adjoint(g, s, t):
    g = np.asarray(g)
    if t == 1 or s == 1:
        return upsample_nearest_adjoint(g, s)
    idx, frac = _linear_weights(t, s)
    frac = frac.astype(g.dtype, copy=False)
    out = np.zeros(g.shape[:-1] + (t,), dtype=g.dtype)
    lead = g.reshape(-1, g.shape[-1])
    flat = out.reshape(-1, t)
    for row_in, row_out in zip(lead, flat):
        np.add.at(row_out, idx, row_in * (1 - frac))
        np.add.at(row_out, idx + 1, row_in * frac)
    return out


def upsample_fourier_tile(x, s):
    """Replicate the length-T spectrum s times and invert at length s*T.

    The result is the input with s-1 zeros inserted after every sample.
    """
    s = _check(s)
    x = np.asarray(x)
    if s == 1:
        return x.copy()
    spec = np.fft.fft(x.astype(np.float64), axis=-1)
    tiled = np.concatenate([spec] * s, axis=-1)
    return np.fft.ifft(tiled, axis=-1).real.astype(x.dtype, copy=False)


def upsample_fourier_tile_adjoint(g, s):
    return np.ascontiguousarray(np.asarray(g)[..., ::s])


def _pad_spectrum(spec, s):
    t = spec.shape[-1]
    n = s * t
    out = np.zeros(spec.shape[:-1] + (n,), dtype=np.complex128)
    half = (t + 1) // 2  # bins 0..half-1 are DC + positive frequencies
    out[..., :half] = spec[..., :half]
    n_neg = t - half
    if t % 2 == 0:
        nyq = spec[..., t // 2]
        out[..., t // 2] = 0.5 * nyq
        out[..., n - t // 2] += 0.5 * nyq
        n_neg -= 1
    if n_neg:
        out[..., n - n_neg :] += spec[..., t - n_neg :]
    return out


def _crop_spectrum(spec, s, t):
    n = spec.shape[-1]
    out = np.zeros(spec.shape[:-1] + (t,), dtype=np.complex128)
    half = (t + 1) // 2
    out[..., :half] = spec[..., :half]
    n_neg = t - half
    if t % 2 == 0:
        out[..., t // 2] = 0.5 * (spec[..., t // 2] + spec[..., n - t // 2])
        n_neg -= 1
    if n_neg:
        out[..., t - n_neg :] = spec[..., n - n_neg :]
    return out


def upsample_fourier_pad(x, s):
    """Band-limited (periodic sinc) interpolation by zero-padding the spectrum.

    An even-length Nyquist bin is split half/half across the two edges so the
    padded spectrum stays Hermitian.
    """
    s = _check(s)
    x = np.asarray(x)
    if s == 1:
        return x.copy()
    spec = np.fft.fft(x.astype(np.float64), axis=-1)
    y = np.fft.ifft(_pad_spectrum(spec, s), axis=-1).real * s
    return y.astype(x.dtype, copy=False)


def upsample_fourier_pad_adjoint(g, s):
    g = np.asarray(g)
    if s == 1:
        return g.copy()
    t = g.shape[-1] // s
    spec = np.fft.fft(g.astype(np.float64), axis=-1)
    return np.fft.ifft(_crop_spectrum(spec, s, t), axis=-1).real.astype(g.dtype, copy=False)


_FORWARD = {
    "nearest": upsample_nearest,
    "linear": upsample_linear,
    "fourier_tile": upsample_fourier_tile,
    "fourier_pad": upsample_fourier_pad,
}


def upsample(x, s, kind="nearest"):
    try:
        fn = _FORWARD[kind]
    except KeyError:
        raise ValueError(f"unknown upsampler {kind!r}; choose from {KINDS}") from None
    return fn(x, s)


def upsample_adjoint(g, s, kind, t):
    """Backward pass of ``upsample(x, s, kind)`` for an input of length ``t``."""
    if kind == "nearest":
        return upsample_nearest_adjoint(g, s)
    if kind == "linear":
        return upsample_linear_adjoint(g, s, t)
    if kind == "fourier_tile":
        return upsample_fourier_tile_adjoint(g, s)
    if kind == "fourier_pad":
        return upsample_fourier_pad_adjoint(g, s)
    raise ValueError(f"unknown upsampler {kind!r}; choose from {KINDS}")
