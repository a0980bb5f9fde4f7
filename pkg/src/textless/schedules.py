"""Learning-rate schedules and the LR range test."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

KINDS = ("multistep", "oclr", "cyclic", "cosine_restarts")


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "oclr"
    total_steps: int = 30_000
    base_lr: float = 4e-3 / 25
    max_lr: float = 4e-3
    final_lr: float = 4e-3 / 1e4
    milestones: tuple = ()
    gamma: float = 0.5
    cycle_fraction: float = 0.3
    decay_shape: str = "cos"  # cos | linear
    step_size: int = 2000
    t0: int = 1000
    t_mult: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; choose from {KINDS}")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if not (0 < self.base_lr <= self.max_lr):
            raise ValueError(f"need 0 < base_lr <= max_lr, got {self.base_lr}, {self.max_lr}")
        if self.final_lr <= 0:
            raise ValueError("final_lr must be positive")
        ms = tuple(int(m) for m in self.milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError(f"milestones must be strictly increasing, got {ms}")
        object.__setattr__(self, "milestones", ms)
        if not (0 < self.cycle_fraction <= 1):
            raise ValueError("cycle_fraction must be in (0, 1]")
        if self.decay_shape not in ("cos", "linear"):
            raise ValueError("decay_shape must be 'cos' or 'linear'")
        if self.step_size < 1 or self.t0 < 1 or self.t_mult < 1:
            raise ValueError("step_size, t0 and t_mult must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["milestones"] = list(self.milestones)
        return d


def multistep_preset(total_steps: int = 160_000, base_lr: float = 4e-4) -> ScheduleConfig:
    """Constant for 50/160 of the budget, then halved every 25/160 of it.

    At the full 160k budget the milestones are 50k, 75k, ..., 150k.
    """
    first = round(total_steps * 50 / 160)
    every = round(total_steps * 25 / 160)
    milestones = tuple(range(first, total_steps, every)) if every > 0 else ()
    return ScheduleConfig(kind="multistep", total_steps=total_steps, base_lr=base_lr,
                          max_lr=base_lr, final_lr=base_lr, milestones=milestones, gamma=0.5)


def oclr_preset(total_steps: int = 30_000, max_lr: float = 4e-3,
                cycle_fraction: float = 0.3) -> ScheduleConfig:
    return ScheduleConfig(kind="oclr", total_steps=total_steps, base_lr=max_lr / 25,
                          max_lr=max_lr, final_lr=max_lr / 1e4, cycle_fraction=cycle_fraction)


def _anneal(start, end, pct, shape="cos"):
    if pct <= 0.0:
        return start
    if pct >= 1.0:
        return end
    if shape == "linear":
        return start + (end - start) * pct
    return end + (start - end) * (1.0 + math.cos(math.pi * pct)) / 2.0


def lr_at(cfg: ScheduleConfig, step: int) -> float:
    if not (0 <= step <= cfg.total_steps):
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    if cfg.kind == "multistep":
        passed = sum(1 for m in cfg.milestones if step >= m)
        return cfg.base_lr * cfg.gamma ** passed
    if cfg.kind == "oclr":
        cycle = max(2, int(round(cfg.cycle_fraction * cfg.total_steps)))
        cycle = min(cycle, max(cfg.total_steps, 1))
        half = cycle / 2.0
        if step <= half:
            return _anneal(cfg.base_lr, cfg.max_lr, step / half)
        if step <= cycle:
            return _anneal(cfg.max_lr, cfg.base_lr, (step - half) / half)
        rest = cfg.total_steps - cycle
        return _anneal(cfg.base_lr, cfg.final_lr, (step - cycle) / rest, cfg.decay_shape)
    if cfg.kind == "cyclic":
        pos = step / cfg.step_size
        cycle = math.floor(1 + pos / 2)
        x = abs(pos - 2 * cycle + 1)
        return cfg.base_lr + (cfg.max_lr - cfg.base_lr) * max(0.0, 1.0 - x)
    # cosine_restarts
    t_i, t_cur = cfg.t0, step
    while t_cur >= t_i:
        t_cur -= t_i
        t_i *= cfg.t_mult
    return _anneal(cfg.max_lr, cfg.base_lr, t_cur / t_i)


def lr_curve(cfg: ScheduleConfig, stride: int = 1) -> np.ndarray:
    steps = list(range(0, cfg.total_steps + 1, stride))
    if steps[-1] != cfg.total_steps:
        steps.append(cfg.total_steps)
    return np.array([[s, lr_at(cfg, s)] for s in steps])


# ---------------------------------------------------------------- LR range test


class NoUsableRange(ValueError):
    pass


@dataclass
class LrrtReport:
    records: list = field(default_factory=list)  # (step, lr, raw_loss, smoothed_loss)
    step_rate: int = 1
    suggested_max_lr: float = float("nan")
    phase_boundaries: tuple = (0, 0)
    exploded: bool = False
    explosion_lr: Optional[float] = None

    @property
    def lrs(self):
        return np.array([r[1] for r in self.records])

    @property
    def smoothed(self):
        return np.array([r[3] for r in self.records])

    def summary(self) -> dict:
        return {
            "step_rate": self.step_rate,
            "suggested_max_lr": self.suggested_max_lr,
            "plateau_end_step": int(self.phase_boundaries[0]),
            "descent_end_step": int(self.phase_boundaries[1]),
            "exploded": self.exploded,
            "explosion_lr": self.explosion_lr,
            "n_records": len(self.records),
        }


def run_lr_range_test(
    step_fn: Callable,
    data: Iterable,
    start_lr: float = 1e-6,
    end_lr: float = 1.0,
    step_rate: int = 1,
    beta: float = 0.98,
    num_lrs: int = 400,
    explosion_factor: float = 4.0,
) -> LrrtReport:
    """Sweep the learning rate geometrically from ``start_lr`` to ``end_lr``.

    ``step_fn(batch, lr)`` performs one optimisation step and returns the
    batch loss. Each LR level is held for ``step_rate`` steps and produces
    one record holding the mean loss of those steps and its bias-corrected
    exponential moving average.
    """
    if not start_lr < end_lr:
        raise ValueError("start_lr must be below end_lr")
    if step_rate < 1 or num_lrs < 2:
        raise ValueError("step_rate must be >= 1 and num_lrs >= 2")
    ratio = (end_lr / start_lr) ** (1.0 / (num_lrs - 1))
    report = LrrtReport(step_rate=step_rate)
    batches = iter(data)
    avg, best, step = 0.0, math.inf, 0
    for i in range(num_lrs):
        lr = start_lr * ratio ** i
        losses = []
        for _ in range(step_rate):
            loss = float(step_fn(next(batches), lr))
            step += 1
            losses.append(loss)
            if not math.isfinite(loss):
                break
        raw = float(np.mean(losses))
        if not math.isfinite(raw):
            report.records.append((step, lr, raw, math.inf))
            report.exploded, report.explosion_lr = True, lr
            break
        avg = beta * avg + (1 - beta) * raw
        smoothed = avg / (1 - beta ** (i + 1))
        report.records.append((step, lr, raw, smoothed))
        if smoothed > explosion_factor * best:
            report.exploded, report.explosion_lr = True, lr
            break
        best = min(best, smoothed)
    report.phase_boundaries = _phases(report)
    try:
        report.suggested_max_lr = analyze_lrrt(report)
    except NoUsableRange:
        report.suggested_max_lr = end_lr if not report.exploded else report.records[0][1]
    return report


def _phases(report: LrrtReport, tol: float = 0.05):
    sm = report.smoothed
    finite = np.isfinite(sm)
    if not finite.any():
        return (0, 0)
    sm = sm[finite]
    steps = [r[0] for r, ok in zip(report.records, finite) if ok]
    below = np.nonzero(sm < (1 - tol) * sm[0])[0]
    plateau_end = steps[below[0]] if below.size else steps[-1]
    descent_end = steps[int(np.argmin(sm))]
    return (plateau_end, descent_end)


def analyze_lrrt(report: LrrtReport, skip_start: int = 10) -> float:
    """LR at the steepest smoothed-loss descent on the log-LR axis.

    The first ``skip_start`` records are ignored because the bias-corrected
    average is still dominated by a handful of samples there.
    """
    if len(report.records) < 10:
        raise ValueError(f"need >= 10 records, got {len(report.records)}")
    lrs, sm = report.lrs, report.smoothed
    keep = np.isfinite(sm)
    keep[: min(skip_start, max(len(sm) - 3, 0))] = False
    if report.exploded:
        # the record that triggered the explosion is not trusted
        keep &= lrs < report.explosion_lr
    lrs, sm = lrs[keep], sm[keep]
    if len(sm) < 3:
        raise NoUsableRange("no usable range: too few finite records before explosion")
    slope = np.gradient(sm, np.log(lrs))
    i = int(np.argmin(slope))
    # rounding in the moving average must not count as descent
    scale = 1e-9 * max(float(np.max(np.abs(sm))), 1e-300)
    if not slope[i] < -scale:
        raise NoUsableRange("no usable range: smoothed loss never descends")
    return float(lrs[i])
