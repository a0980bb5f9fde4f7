"""Schedule-driven training loops for the encoder and the vocoder."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from textless.audio import mulaw_encode
from textless.nn.optim import Adam, clip_grad_norm
from textless.schedules import ScheduleConfig, lr_at

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, step, lr, batch_id, loss):
        super().__init__(f"non-finite loss {loss} at step {step} (lr={lr:.3g}, batch {batch_id})")
        self.step, self.lr, self.batch_id = step, lr, batch_id


@dataclass
class TrainState:
    model: object
    optimizer: Adam
    rng: np.random.Generator
    step: int = 0
    log_rows: list = field(default_factory=list)  # (step, lr, loss, grad_norm, *extras)
    wall_time: float = 0.0


def new_state(model, seed):
    return TrainState(model, Adam(model.params()), np.random.default_rng(seed))


def run_training(state: TrainState, sample_batch: Callable, schedule: ScheduleConfig,
                 steps: Optional[int] = None, clip: float = 1.0, log_every: int = 10,
                 on_checkpoint: Optional[Callable] = None, checkpoint_every: int = 0):
    """Advance ``state`` by ``steps`` optimisation steps (default: to the schedule end).

    The learning rate for the update taken at step s is ``lr_at(schedule, s)``,
    so resuming from a saved step continues the schedule exactly.
    """
    end = schedule.total_steps if steps is None else min(schedule.total_steps, state.step + steps)
    t0 = time.perf_counter()
    model = state.model
    params = model.params()
    while state.step < end:
        lr = lr_at(schedule, state.step)
        batch = sample_batch(state.rng)
        loss, extras = model.loss_and_backward(batch, state.rng)
        if not math.isfinite(loss):
            raise TrainingDiverged(state.step, lr, state.step, loss)
        gnorm = clip_grad_norm(params, clip)
        state.optimizer.step(lr)
        state.step += 1
        if state.step % log_every == 0 or state.step == end:
            state.log_rows.append((state.step, lr, loss, gnorm) + tuple(extras.values()))
            log.debug("step %d lr %.3g loss %.4f", state.step, lr, loss)
        if on_checkpoint and checkpoint_every and state.step % checkpoint_every == 0:
            on_checkpoint(state)
    state.wall_time += time.perf_counter() - t0
    return state


# ---------------------------------------------------------------- batch samplers


def encoder_sampler(mels, frames, batch_size):
    """Random ``frames``-long windows from normalized mel arrays [n_mels, T]."""
    usable = [m for m in mels if m.shape[1] >= frames]
    if not usable:
        raise ValueError(f"no utterance has >= {frames} frames")

    def sample(rng):
        out = np.empty((batch_size, usable[0].shape[0], frames))
        for b in range(batch_size):
            m = usable[int(rng.integers(len(usable)))]
            f0 = int(rng.integers(0, m.shape[1] - frames + 1))
            out[b] = m[:, f0 : f0 + frames]
        return out

    return sample


def vocoder_sampler(items, cfg, batch_size):
    """Unit-aligned windows of ``cfg.frames // 2`` units and matching mu-law audio.

    ``items`` hold ``units`` (int array), ``speaker_index`` and ``samples``.
    """
    n_units = cfg.frames // 2
    spu = cfg.samples_per_unit
    usable = [it for it in items
              if len(it["units"]) >= n_units and len(it["samples"]) >= n_units * spu]
    if not usable:
        raise ValueError(f"no utterance covers a {n_units}-unit window")

    def sample(rng):
        units = np.empty((batch_size, n_units), dtype=np.int64)
        spk = np.empty(batch_size, dtype=np.int64)
        codes = np.empty((batch_size, n_units * spu), dtype=np.int64)
        for b in range(batch_size):
            it = usable[int(rng.integers(len(usable)))]
            limit = min(len(it["units"]), len(it["samples"]) // spu) - n_units
            u0 = int(rng.integers(0, limit + 1))
            units[b] = it["units"][u0 : u0 + n_units]
            spk[b] = it["speaker_index"]
            codes[b] = mulaw_encode(it["samples"][u0 * spu : (u0 + n_units) * spu], cfg.mu_channels)
        return units, spk, codes

    return sample


def vocoder_eval_nll(model, items, cfg):
    """Teacher-forced NLL (nats/sample) pooled over whole utterances."""
    spu = cfg.samples_per_unit
    total, count = 0.0, 0
    for it in items:
        n = min(len(it["units"]), len(it["samples"]) // spu)
        if n == 0:
            continue
        codes = mulaw_encode(it["samples"][: n * spu], cfg.mu_channels)[None]
        nll = model.nll(it["units"][None, :n], [it["speaker_index"]], codes)
        total += nll * codes.size
        count += codes.size
    return total / count
