"""Unit-conditioned LSTM vocoder with a mu-law autoregressive sample head.

units -> code embedding (+ speaker embedding) -> upsample x s1 -> LSTM
      -> upsample x s2 -> projection + previous-sample embeddings -> ReLU
      -> 256-way logits per sample
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from textless import kernels
from textless.audio import Waveform, mulaw_decode
from textless.nn.layers import LSTM, Conv1d, Embedding, Linear, Module, ReLU, softmax_xent
from textless.upsample import KINDS, ScaleChain, upsample, upsample_adjoint, validate_scale_chain

START_CODE = 128  # mu-law code of silence at 256 channels


@dataclass(frozen=True)
class VocoderConfig:
    n_codes: int = 512
    code_dim: int = 64
    n_speakers: int = 102
    speaker_dim: int = 64
    s1: int = 2
    s2: int = 160
    hop: int = 160
    lstm_hidden: int = 256
    head_hidden: int = 256
    upsample1: str = "nearest"
    upsample2: str = "nearest"
    tile_conv: bool = True  # learned smoothing conv after a fourier_tile stage
    mu_channels: int = 256
    ar_order: int = 2
    frames: int = 32  # mel frames per training window
    sample_rate: int = 16000

    def __post_init__(self):
        validate_scale_chain(self.chain)
        for kind in (self.upsample1, self.upsample2):
            if kind not in KINDS:
                raise ValueError(f"unknown upsampler {kind!r}; choose from {KINDS}")
        if self.ar_order < 1:
            raise ValueError("ar_order must be >= 1")
        if self.frames < 2 or self.frames % 2:
            raise ValueError("frames must be an even number >= 2")

    @property
    def chain(self):
        return ScaleChain(self.s1, self.s2, self.hop)

    @property
    def samples_per_unit(self):
        return 2 * self.hop

    @property
    def start_code(self):
        # mu-law code of silence, fed as the sample before the first
        return self.mu_channels // 2

    def to_dict(self):
        return dataclasses.asdict(self)


def shifted_codes(codes, order, start=START_CODE):
    """[B, N] codes -> [order, B, N] where plane j holds the code j+1 steps back."""
    codes = np.asarray(codes)
    out = np.full((order,) + codes.shape, start, dtype=np.int64)
    for j in range(order):
        out[j, :, j + 1 :] = codes[:, : codes.shape[1] - j - 1]
    return out


class Vocoder(Module):
    def __init__(self, cfg: VocoderConfig, rng, dtype=np.float32):
        self.cfg = cfg
        c_in = cfg.code_dim + cfg.speaker_dim
        self.code_emb = Embedding(cfg.n_codes, cfg.code_dim, rng, dtype)
        self.spk_emb = Embedding(cfg.n_speakers, cfg.speaker_dim, rng, dtype)
        self.conv1 = self.conv2 = None
        if cfg.tile_conv and cfg.upsample1 == "fourier_tile":
            self.conv1 = Conv1d(c_in, c_in, 2 * cfg.s1 - 1, rng, padding=cfg.s1 - 1, dtype=dtype)
        self.lstm = LSTM(c_in, cfg.lstm_hidden, rng, dtype)
        if cfg.tile_conv and cfg.upsample2 == "fourier_tile":
            h = cfg.lstm_hidden
            self.conv2 = Conv1d(h, h, 2 * cfg.s2 - 1, rng, padding=cfg.s2 - 1, dtype=dtype)
        self.cond = Linear(cfg.lstm_hidden, cfg.head_hidden, rng, dtype)
        self.prev_emb = [
            Embedding(cfg.mu_channels, cfg.head_hidden, rng, dtype, scale=0.1)
            for _ in range(cfg.ar_order)
        ]
        self.out = Linear(cfg.head_hidden, cfg.mu_channels, rng, dtype)
        self._act = ReLU()

    @property
    def dtype(self):
        return self.out.W.data.dtype

    def conditioning(self, units, speakers):
        """Per-sample conditioning pre-activations [B, N, head_hidden]."""
        cfg = self.cfg
        units = np.atleast_2d(np.asarray(units, dtype=np.int64))
        speakers = np.atleast_1d(np.asarray(speakers, dtype=np.int64))
        b, u = units.shape
        ec = self.code_emb.forward(units)
        es = self.spk_emb.forward(speakers)
        x = np.concatenate([ec, np.broadcast_to(es[:, None, :], (b, u, es.shape[1]))], axis=2)
        x = upsample(x.transpose(0, 2, 1), cfg.s1, cfg.upsample1)
        if self.conv1 is not None:
            x = self.conv1.forward(x)
        h = self.lstm.forward(np.ascontiguousarray(x.transpose(0, 2, 1)))
        y = upsample(h.transpose(0, 2, 1), cfg.s2, cfg.upsample2)
        if self.conv2 is not None:
            y = self.conv2.forward(y)
        self._shapes = (b, u)
        return self.cond.forward(np.ascontiguousarray(y.transpose(0, 2, 1)))

    def conditioning_backward(self, g):
        cfg = self.cfg
        b, u = self._shapes
        gy = self.cond.backward(g).transpose(0, 2, 1)
        if self.conv2 is not None:
            gy = self.conv2.backward(gy)
        gh = upsample_adjoint(gy, cfg.s2, cfg.upsample2, u * cfg.s1)
        gx = self.lstm.backward(np.ascontiguousarray(gh.transpose(0, 2, 1))).transpose(0, 2, 1)
        if self.conv1 is not None:
            gx = self.conv1.backward(gx)
        gx = upsample_adjoint(gx, cfg.s1, cfg.upsample1, u).transpose(0, 2, 1)
        self.code_emb.backward(np.ascontiguousarray(gx[:, :, : cfg.code_dim]))
        self.spk_emb.backward(gx[:, :, cfg.code_dim :].sum(axis=1))

    def forward(self, units, speakers, teacher_codes):
        """Teacher-forced logits [B, N, mu_channels]; N = units * 2 * hop."""
        units = np.atleast_2d(np.asarray(units, dtype=np.int64))
        teacher_codes = np.atleast_2d(np.asarray(teacher_codes, dtype=np.int64))
        n = units.shape[1] * self.cfg.samples_per_unit
        if teacher_codes.shape != (units.shape[0], n):
            raise ValueError(
                f"teacher audio has shape {teacher_codes.shape}, expected "
                f"{(units.shape[0], n)} for {units.shape[1]} units at hop {self.cfg.hop}"
            )
        h = self.conditioning(units, speakers)
        prev = shifted_codes(teacher_codes, self.cfg.ar_order, self.cfg.start_code)
        for emb, codes in zip(self.prev_emb, prev):
            h = h + emb.forward(codes)
        return self.out.forward(self._act.forward(h))

    def backward(self, dlogits):
        g = self._act.backward(self.out.backward(dlogits))
        for emb in self.prev_emb:
            emb.backward(g)
        self.conditioning_backward(g)

    def loss_and_backward(self, batch, rng=None):
        units, speakers, codes = batch
        self.zero_grad()
        logits = self.forward(units, speakers, codes)
        q = logits.shape[-1]
        loss, d = softmax_xent(logits.reshape(-1, q), codes.reshape(-1))
        self.backward(d.reshape(logits.shape))
        return loss, {"nll": loss}

    def nll(self, units, speakers, codes):
        """Mean teacher-forced negative log-likelihood in nats per sample."""
        logits = self.forward(units, speakers, codes)
        q = logits.shape[-1]
        loss, _ = softmax_xent(logits.reshape(-1, q).astype(np.float64), np.asarray(codes).reshape(-1))
        return loss

    def generate(self, units, speaker, temperature=0.0, seed=0) -> Waveform:
        """Autoregressive synthesis; temperature <= 0 means argmax decoding."""
        cond = self.conditioning(np.asarray(units)[None], [speaker])[0]
        tables = np.stack([e.E.data for e in self.prev_emb]).astype(np.float64)
        rng = np.random.default_rng(seed)
        uniforms = rng.random(len(cond))
        codes = kernels.ar_generate(cond.astype(np.float64), tables,
                                    self.out.W.data.T.astype(np.float64),
                                    self.out.b.data.astype(np.float64),
                                    float(temperature), uniforms, self.cfg.start_code)
        return Waveform(mulaw_decode(codes, self.cfg.mu_channels), self.cfg.sample_rate)
