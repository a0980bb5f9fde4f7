"""VQ-CPC encoder: conv front end, VQ bottleneck, LSTM context, InfoNCE head."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from textless.models.vq import VectorQuantizer
from textless.nn.layers import LSTM, Conv1d, LayerNorm, Linear, Module, ReLU, softmax_xent


@dataclass(frozen=True)
class EncoderConfig:
    n_mels: int = 80
    channels: int = 256
    z_dim: int = 64
    n_codes: int = 512
    context_dim: int = 256
    horizon: int = 4  # CPC prediction steps K
    n_negatives: int = 16
    beta: float = 0.25
    use_norm: bool = True
    frames: int = 128  # mel frames per training window
    batch_size: int = 8
    steps: int = 22_000
    max_lr: float = 4e-3

    def __post_init__(self):
        if self.horizon < 1 or self.n_negatives < 1:
            raise ValueError("horizon and n_negatives must be >= 1")
        if self.frames // 2 <= self.horizon:
            raise ValueError(f"frames//2 ({self.frames // 2}) must exceed horizon ({self.horizon})")

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class UnitSequence:
    indices: np.ndarray
    frame_rate: float
    speaker: str = ""
    id: str = ""

    def to_json(self):
        return {"id": self.id, "speaker": self.speaker,
                "indices": [int(i) for i in self.indices], "frame_rate": self.frame_rate}


def _tie_split_accuracy(logits):
    """Mean credit of the positive (column 0); a tie among m maxima earns 1/m.

    Quantised targets make exact ties common, so plain argmax would reward a
    collapsed codebook.
    """
    top = logits.max(axis=1, keepdims=True)
    at_top = logits == top
    return float(np.mean(at_top[:, 0] / at_top.sum(axis=1)))


class InfoNCE:
    """Contrastive future prediction over the flattened batch.

    ``preds`` is [B, T, K, d]: the prediction made at t for step t+k+1.
    Negatives are drawn uniformly from all other positions in the batch.
    """

    def __init__(self, horizon, n_negatives):
        self.horizon = horizon
        self.n_negatives = n_negatives

    def forward(self, preds, targets, rng):
        b, t, k_max, d = preds.shape
        if t <= self.horizon:
            raise ValueError(f"sequence of {t} steps too short for horizon {self.horizon}")
        n_pos = b * t
        if n_pos < 2:
            raise ValueError("batch too small to draw negatives")
        flat = targets.reshape(n_pos, d)
        losses, accs, caches = [], [], []
        for k in range(1, self.horizon + 1):
            rows_b, rows_t = np.meshgrid(np.arange(b), np.arange(t - k), indexing="ij")
            pos = (rows_b * t + rows_t + k).reshape(-1)
            neg = rng.integers(0, n_pos - 1, size=(len(pos), self.n_negatives))
            neg += neg >= pos[:, None]  # skip the positive itself
            cand = np.concatenate([pos[:, None], neg], axis=1)
            p = preds[:, : t - k, k - 1].reshape(-1, d)
            logits = np.einsum("nd,ncd->nc", p, flat[cand])
            loss, dlogits = softmax_xent(logits, np.zeros(len(pos), dtype=np.int64))
            losses.append(loss)
            accs.append(_tie_split_accuracy(logits))
            caches.append((cand, p, dlogits))
        self._cache = (preds.shape, flat, caches)
        return float(np.mean(losses)), accs

    def backward(self, weight=1.0):
        shape, flat, caches = self._cache
        b, t, k_max, d = shape
        dpreds = np.zeros(shape, dtype=flat.dtype)
        dflat = np.zeros_like(flat)
        scale = weight / self.horizon
        for k, (cand, p, dlogits) in enumerate(caches, start=1):
            dl = dlogits * scale
            dpreds[:, : t - k, k - 1] = np.einsum("nc,ncd->nd", dl, flat[cand]).reshape(b, t - k, d)
            np.add.at(dflat, cand.reshape(-1), (dl[:, :, None] * p[:, None, :]).reshape(-1, d))
        return dpreds, dflat.reshape(b, t, d)


def cpc_infonce_loss(context, targets, predictor, horizon, n_negatives, rng):
    """InfoNCE loss and per-step accuracy for context [B,T,c] and targets [B,T,d].

    ``predictor`` maps context to K*d stacked predictions (a Linear layer).
    """
    b, t, _ = context.shape
    d = targets.shape[-1]
    preds = predictor.forward(context).reshape(b, t, horizon, d)
    return InfoNCE(horizon, n_negatives).forward(preds, targets, rng)


class Encoder(Module):
    def __init__(self, cfg: EncoderConfig, rng, dtype=np.float32):
        self.cfg = cfg
        c = cfg.channels
        self.norm_in = LayerNorm(cfg.n_mels, dtype)  # per-frame, over mel bins
        self.conv1 = Conv1d(cfg.n_mels, c, 3, rng, stride=1, padding=1, dtype=dtype)
        self.norm1 = LayerNorm(c, dtype)
        self.conv2 = Conv1d(c, c, 4, rng, stride=2, padding=1, dtype=dtype)
        self.norm2 = LayerNorm(c, dtype)
        self.proj = Linear(c, cfg.z_dim, rng, dtype)
        self.vq = VectorQuantizer(cfg.n_codes, cfg.z_dim, rng, cfg.beta, dtype)
        self.context = LSTM(cfg.z_dim, cfg.context_dim, rng, dtype)
        self.predictor = Linear(cfg.context_dim, cfg.horizon * cfg.z_dim, rng, dtype)
        self._act1, self._act2 = ReLU(), ReLU()
        self._nce = InfoNCE(cfg.horizon, cfg.n_negatives)

    @property
    def dtype(self):
        return self.proj.W.data.dtype

    def features(self, mel):
        """Pre-quantisation features z [B, floor(T/2), d] for mel [B, n_mels, T]."""
        mel = np.asarray(mel, dtype=self.dtype)
        if mel.ndim == 2:
            mel = mel[None]
        if mel.shape[2] < 2:
            raise ValueError(f"input of {mel.shape[2]} frames is shorter than the receptive field")
        if self.cfg.use_norm:
            # min-max scaled log-Mel frames have little contrast; standardise each frame
            mel = self.norm_in.forward(mel.transpose(0, 2, 1)).transpose(0, 2, 1)
        h = self.conv1.forward(mel).transpose(0, 2, 1)
        if self.cfg.use_norm:
            h = self.norm1.forward(h)
        h = self._act1.forward(h).transpose(0, 2, 1)
        h = self.conv2.forward(h).transpose(0, 2, 1)
        if self.cfg.use_norm:
            h = self.norm2.forward(h)
        h = self._act2.forward(h)
        return self.proj.forward(h)

    def features_backward(self, dz):
        g = self.proj.backward(dz)
        g = self._act2.backward(g)
        if self.cfg.use_norm:
            g = self.norm2.backward(g)
        g = self.conv2.backward(g.transpose(0, 2, 1)).transpose(0, 2, 1)
        g = self._act1.backward(g)
        if self.cfg.use_norm:
            g = self.norm1.backward(g)
        g = self.conv1.backward(g.transpose(0, 2, 1))
        if self.cfg.use_norm:
            g = self.norm_in.backward(g.transpose(0, 2, 1)).transpose(0, 2, 1)
        return g

    def forward(self, mel):
        """Returns (z, z_q, indices, context, vq_loss, commit_loss)."""
        z = self.features(mel)
        z_q, idx, vq_loss, commit = self.vq.forward(z)
        ctx = self.context.forward(z_q)
        return z, z_q, idx, ctx, vq_loss, commit

    def encode(self, mel, frame_rate=0.0, speaker="", utt_id=""):
        """(context [T', c], UnitSequence) for a single [n_mels, T] spectrogram."""
        _, _, idx, ctx, _, _ = self.forward(mel)
        return ctx[0], UnitSequence(idx[0].astype(np.int64), frame_rate, speaker, utt_id)

    def evaluate(self, batch, rng):
        """InfoNCE loss and prediction accuracy on a mel batch, leaving the model untouched."""
        _, z_q, _, ctx, _, _ = self.forward(batch)
        b, t, _ = ctx.shape
        preds = self.predictor.forward(ctx).reshape(b, t, self.cfg.horizon, self.cfg.z_dim)
        nce, accs = InfoNCE(self.cfg.horizon, self.cfg.n_negatives).forward(preds, z_q, rng)
        return nce, float(np.mean(accs))

    def loss_and_backward(self, batch, rng):
        """One training pass over a mel batch [B, n_mels, frames]; fills grads."""
        self.zero_grad()
        z, z_q, idx, ctx, vq_loss, commit = self.forward(batch)
        b, t, _ = ctx.shape
        preds = self.predictor.forward(ctx).reshape(b, t, self.cfg.horizon, self.cfg.z_dim)
        nce, accs = self._nce.forward(preds, z_q, rng)
        dpreds, dzq_target = self._nce.backward()
        dctx = self.predictor.backward(dpreds.reshape(b, t, -1))
        dzq = self.context.backward(dctx) + dzq_target
        dz = self.vq.backward(dzq)
        self.features_backward(dz)
        self.vq.update_usage(idx, z, rng)
        loss = nce + vq_loss + commit
        return loss, {"nce": nce, "vq": vq_loss, "commit": commit,
                      "accuracy": float(np.mean(accs))}
