"""Evaluation metrics: error rates, spectrogram quality, bitrate, DTW and ABX."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import correlate

from textless import kernels


@dataclass
class MetricReport:
    metric: str
    value: float
    units: str = ""
    n_items: int = 0
    config: dict = field(default_factory=dict)

    def row(self):
        return [self.metric, repr(float(self.value)), self.units, self.n_items,
                ";".join(f"{k}={v}" for k, v in sorted(self.config.items()))]


CSV_HEADER = ["metric", "value", "units", "n_items", "config"]


# ---------------------------------------------------------------- edit distance


def _as_ids(a, b):
    vocab = {}
    ia = np.array([vocab.setdefault(t, len(vocab)) for t in a], dtype=np.int64)
    ib = np.array([vocab.setdefault(t, len(vocab)) for t in b], dtype=np.int64)
    return ia, ib


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Levenshtein distance with unit insertion, deletion and substitution costs."""
    ia, ib = _as_ids(ref, hyp)
    return int(kernels.levenshtein(ia, ib))


def tokenize(text, unit):
    if unit == "word":
        return text.split()
    if unit == "char":
        return [c for c in text if not c.isspace()]
    if unit == "phoneme":
        # caller-provided symbol list, or whitespace-separated symbols
        return list(text) if not isinstance(text, str) else text.split()
    raise ValueError(f"unknown unit {unit!r}; choose char, word or phoneme")


def error_rate(ref, hyp, unit="char") -> float:
    """Error rate in percent for one reference/hypothesis pair."""
    r, h = tokenize(ref, unit), tokenize(hyp, unit)
    if not r:
        raise ValueError("empty reference")
    return 100.0 * edit_distance(r, h) / len(r)


def corpus_error_rate(pairs, unit="char", verbose=False):
    """Pooled error rate: total edits over total reference tokens.

    With ``verbose`` returns (pooled, utterance_averaged).
    """
    dist = total = 0
    per_utt = []
    for ref, hyp in pairs:
        r, h = tokenize(ref, unit), tokenize(hyp, unit)
        if not r:
            raise ValueError("empty reference")
        d = edit_distance(r, h)
        dist += d
        total += len(r)
        per_utt.append(100.0 * d / len(r))
    if total == 0:
        raise ValueError("no reference tokens")
    pooled = 100.0 * dist / total
    return (pooled, float(np.mean(per_utt))) if verbose else pooled


# ---------------------------------------------------------------- spectrogram quality


def _values(m):
    return np.asarray(getattr(m, "values", m), dtype=np.float64)


def align_lengths(a, b, tolerance=1):
    """Trim two [n_mels, frames] arrays to the shorter frame count."""
    a, b = _values(a), _values(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"mel dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if abs(a.shape[1] - b.shape[1]) > tolerance:
        raise ValueError(f"frame counts differ by more than {tolerance}: {a.shape[1]} vs {b.shape[1]}")
    n = min(a.shape[1], b.shape[1])
    return a[:, :n], b[:, :n]


def ls_mse(a, b) -> float:
    a, b = align_lengths(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak=1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the inputs are identical."""
    mse = ls_mse(a, b)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def gaussian_window(size=7, sigma=1.5):
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, data_range=1.0, k1=0.01, k2=0.03, win=7, sigma=1.5) -> float:
    """Mean SSIM over all fully-contained 7x7 Gaussian-weighted windows."""
    a, b = align_lengths(a, b)
    if a.shape[0] < win or a.shape[1] < win:
        raise ValueError(f"inputs of shape {a.shape} are smaller than the {win}x{win} window")
    w = gaussian_window(win, sigma)
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2

    def filt(x):
        return correlate(x, w, mode="valid", method="direct")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------- units


def bitrate(sequences, total_duration, collapse_runs=False) -> float:
    """Symbols per second times the empirical symbol entropy (bits)."""
    if total_duration <= 0:
        raise ValueError("total_duration must be positive")
    symbols = []
    for seq in sequences:
        idx = np.asarray(getattr(seq, "indices", seq)).reshape(-1)
        if collapse_runs and idx.size:
            idx = idx[np.r_[True, idx[1:] != idx[:-1]]]
        symbols.extend(idx.tolist())
    if not symbols:
        raise ValueError("no symbols")
    counts = np.array(list(Counter(symbols).values()), dtype=np.float64)
    p = counts / counts.sum()
    entropy = float(-(p * np.log2(p)).sum())
    return len(symbols) / total_duration * entropy


# ---------------------------------------------------------------- DTW / ABX


def frame_distances(x, y, metric="cosine"):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] == 1 and x.shape[1] != y.shape[1]:
        x = x.T
    if y.shape[0] == 1 and y.shape[1] != x.shape[1]:
        y = y.T
    if metric == "euclidean":
        d = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
        return np.sqrt(np.maximum(d, 0.0))
    if metric == "abs":
        return np.abs(x[:, None, :] - y[None, :, :]).sum(-1)
    if metric == "cosine":
        nx = np.linalg.norm(x, axis=1)
        ny = np.linalg.norm(y, axis=1)
        denom = np.outer(nx, ny)
        sim = np.divide(x @ y.T, denom, out=np.zeros_like(denom), where=denom > 0)
        # two all-zero frames are identical
        sim[np.outer(nx == 0, ny == 0)] = 1.0
        return np.clip(1.0 - sim, 0.0, 2.0)
    raise ValueError(f"unknown frame metric {metric!r}")


def dtw_distance(x, y, frame_metric="cosine") -> float:
    """Path-length-normalized DTW distance between two frame sequences."""
    if len(x) == 0 or len(y) == 0:
        raise ValueError("DTW needs non-empty sequences")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    return float(kernels.dtw_accumulate(frame_distances(x, y, frame_metric)))


@dataclass
class AbxItem:
    features: np.ndarray  # [frames, d]
    category: str
    speaker: str


def distance_matrix(items, frame_metric="cosine"):
    n = len(items)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = dtw_distance(items[i].features, items[j].features, frame_metric)
    return d


def _count_errors(d_ax, d_bx):
    """Sum over all (A, B) pairs of [d(B,X) < d(A,X)] + 0.5 [tie]."""
    bx = np.sort(d_bx)
    lo = np.searchsorted(bx, d_ax, side="left")
    hi = np.searchsorted(bx, d_ax, side="right")
    return float(lo.sum() + 0.5 * (hi - lo).sum())


def abx_error(items, mode="within", frame_metric="cosine", distances=None,
              max_items_per_group: Optional[int] = None, seed: int = 0) -> float:
    """ABX error rate (percent) over every valid (A, B, X) triplet.

    within: A, B and X share a speaker. across: A and B share a speaker and X
    comes from a different one. A and X share a category, B does not.
    ``max_items_per_group`` subsamples (speaker, category) groups with ``seed``
    before distances are computed.
    """
    if mode not in ("within", "across"):
        raise ValueError("mode must be 'within' or 'across'")
    items = list(items)
    if max_items_per_group is not None and distances is None:
        rng = np.random.default_rng(seed)
        groups = {}
        for i, it in enumerate(items):
            groups.setdefault((it.speaker, it.category), []).append(i)
        keep = []
        for key in sorted(groups):
            idx = groups[key]
            if len(idx) > max_items_per_group:
                idx = sorted(rng.choice(idx, size=max_items_per_group, replace=False).tolist())
            keep.extend(idx)
        items = [items[i] for i in sorted(keep)]
    if len({it.category for it in items}) < 2:
        raise ValueError("ABX needs at least two categories")
    d = distance_matrix(items, frame_metric) if distances is None else np.asarray(distances)
    cats = np.array([it.category for it in items])
    spks = np.array([it.speaker for it in items])
    errors = 0.0
    count = 0
    for x in range(len(items)):
        same_cat = cats == cats[x]
        if mode == "within":
            ab_spk_ok = spks == spks[x]
            a_mask = same_cat & ab_spk_ok
            a_mask[x] = False
            b_mask = ~same_cat & ab_spk_ok
            if a_mask.any() and b_mask.any():
                errors += _count_errors(d[a_mask, x], d[b_mask, x])
                count += int(a_mask.sum()) * int(b_mask.sum())
        else:
            for s in np.unique(spks):
                if s == spks[x]:
                    continue
                a_mask = same_cat & (spks == s)
                b_mask = ~same_cat & (spks == s)
                if a_mask.any() and b_mask.any():
                    errors += _count_errors(d[a_mask, x], d[b_mask, x])
                    count += int(a_mask.sum()) * int(b_mask.sum())
    if count == 0:
        raise ValueError(f"no valid ABX triplet for mode {mode!r}")
    return 100.0 * errors / count


def abx_triplet_count(items, mode="within"):
    cats = np.array([it.category for it in items])
    spks = np.array([it.speaker for it in items])
    total = 0
    for x in range(len(items)):
        same = cats == cats[x]
        if mode == "within":
            ok = spks == spks[x]
            total += int((same & ok).sum() - 1) * int((~same & ok).sum())
        else:
            for s in np.unique(spks):
                if s != spks[x]:
                    ok = spks == s
                    total += int((same & ok).sum()) * int((~same & ok).sum())
    return total
