"""Audio I/O, mu-law companding and the log-Mel front end."""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import os
import struct
import tempfile
import wave
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal

LOG_FLOOR = 1e-10
MEL_MAGIC = b"MEL1"


class WavFormatError(ValueError):
    pass


class TooShortError(ValueError):
    pass


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    n_mels: int = 80
    win_ms: float = 40.0
    hop: int = 160
    n_fft: int = 1024
    fmin: float = 0.0
    fmax: Optional[float] = None
    log_floor: float = LOG_FLOOR

    def __post_init__(self):
        if self.fmax is None:
            object.__setattr__(self, "fmax", self.sample_rate / 2)
        if not (0 < self.hop <= self.win_length <= self.n_fft):
            raise ValueError(
                f"need 0 < hop ({self.hop}) <= window ({self.win_length}) <= n_fft ({self.n_fft})"
            )
        if not (0 <= self.fmin < self.fmax <= self.sample_rate / 2):
            raise ValueError(
                f"need 0 <= fmin < fmax <= sample_rate/2, got {self.fmin}, {self.fmax}"
            )
        if self.n_mels < 1 or self.log_floor <= 0:
            raise ValueError("n_mels must be >= 1 and log_floor positive")

    @property
    def win_length(self) -> int:
        return int(round(self.win_ms * self.sample_rate / 1000.0))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class MelSpectrogram:
    values: np.ndarray  # [n_mels, n_frames]
    config_hash: str
    norm: str = "log"  # raw | log | minmax
    stats: Optional[tuple] = None  # (min, max) when norm == "minmax"
    extra: dict = field(default_factory=dict)

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------- WAV I/O


def load_wav(path) -> Waveform:
    """Read a PCM16 RIFF/WAVE file; the first channel is kept."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n = wf.getnframes()
            raw = wf.readframes(n)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise WavFormatError(f"unsupported codec in {path}: {msg}") from exc
        raise WavFormatError(f"malformed WAV {path}: {msg}") from exc
    except (EOFError, struct.error) as exc:
        raise WavFormatError(f"malformed WAV {path}: truncated header") from exc
    if width != 2:
        raise WavFormatError(f"unsupported codec in {path}: {8 * width}-bit PCM")
    data = np.frombuffer(raw, dtype="<i2")
    if data.size == 0:
        raise WavFormatError(f"malformed WAV {path}: zero-length payload")
    data = data[: (data.size // n_channels) * n_channels].reshape(-1, n_channels)[:, 0]
    return Waveform(data.astype(np.float64) / 32768.0, rate)


def wav_bytes(w: Waveform) -> bytes:
    """Encode as a mono PCM16 RIFF/WAVE file image."""
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(w.sample_rate))
        wf.writeframes(pcm.tobytes())
    return buf.getvalue()


def save_wav(path, w: Waveform) -> None:
    atomic_write_bytes(path, wav_bytes(w))


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Polyphase windowed-sinc resampling to ``target_rate``."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    g = gcd(int(target_rate), int(w.sample_rate))
    up, down = int(target_rate) // g, int(w.sample_rate) // g
    y = signal.resample_poly(w.samples, up, down, window=("kaiser", 8.0), padtype="line")
    return Waveform(y, int(target_rate))


# ---------------------------------------------------------------- mu-law


def mulaw_encode(x, channels: int = 256):
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    mu = channels - 1
    f = np.sign(x) * np.log1p(mu * np.abs(x)) / np.log1p(mu)
    q = np.floor((f + 1.0) / 2.0 * mu + 0.5)
    return np.clip(q, 0, mu).astype(np.int64)


def mulaw_decode(code, channels: int = 256):
    mu = channels - 1
    f = 2.0 * np.asarray(code, dtype=np.float64) / mu - 1.0
    return np.sign(f) * np.expm1(np.abs(f) * np.log1p(mu)) / mu


# ---------------------------------------------------------------- log-Mel


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """HTK-scale triangular filters with unit area in Hz, shape [n_mels, n_fft//2+1]."""
    freqs = np.arange(cfg.n_fft // 2 + 1) * cfg.sample_rate / cfg.n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    tri = np.maximum(0.0, np.minimum(rising, falling))
    return tri * (2.0 / (hi - lo))


def mel_centers(cfg: FeatureConfig) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    return edges[1:-1]


def n_frames_for(n_samples: int, cfg: FeatureConfig) -> int:
    win = cfg.win_length
    if n_samples < win:
        return 0
    return 1 + (n_samples - win) // cfg.hop


def stft_magnitude(x: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    win = cfg.win_length
    n = n_frames_for(len(x), cfg)
    if n == 0:
        raise TooShortError(f"signal of {len(x)} samples is shorter than one window ({win})")
    frames = np.lib.stride_tricks.sliding_window_view(x, win)[:: cfg.hop][:n]
    window = signal.get_window("hann", win, fftbins=True)
    return np.abs(np.fft.rfft(frames * window, n=cfg.n_fft, axis=-1)).T


def log_mel(w: Waveform, cfg: FeatureConfig) -> MelSpectrogram:
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform rate {w.sample_rate} != feature rate {cfg.sample_rate}")
    mag = stft_magnitude(w.samples, cfg)
    mel = mel_filterbank(cfg) @ mag
    return MelSpectrogram(np.log(np.maximum(mel, cfg.log_floor)), cfg.config_hash(), "log")


def minmax_normalize(m: MelSpectrogram, stats=None) -> MelSpectrogram:
    if m.norm != "log":
        raise ValueError(f"expected a log-compressed spectrogram, got norm={m.norm!r}")
    if stats is None:
        lo, hi = float(m.values.min()), float(m.values.max())
    else:
        lo, hi = float(stats[0]), float(stats[1])
    if hi == lo:
        values = np.zeros_like(m.values)
    else:
        values = np.clip((m.values - lo) / (hi - lo), 0.0, 1.0)
    return MelSpectrogram(values, m.config_hash, "minmax", (lo, hi), dict(m.extra))


def denormalize(m: MelSpectrogram) -> MelSpectrogram:
    if m.norm != "minmax":
        raise ValueError("spectrogram is not min-max normalized")
    lo, hi = m.stats
    return MelSpectrogram(m.values * (hi - lo) + lo, m.config_hash, "log", None, dict(m.extra))


def global_stats(mels) -> tuple:
    """(min, max) over an iterable of log-Mel spectrograms."""
    lo, hi = np.inf, -np.inf
    for m in mels:
        lo = min(lo, float(m.values.min()))
        hi = max(hi, float(m.values.max()))
    if not np.isfinite(lo):
        raise ValueError("no spectrograms given")
    return lo, hi


def sample_training_window(mel, audio, frames: int, hop: int, rng):
    """Random aligned (mel[:, f0:f0+frames], audio[f0*hop:(f0+frames)*hop]) pair."""
    values = mel.values if isinstance(mel, MelSpectrogram) else np.asarray(mel)
    samples = audio.samples if isinstance(audio, Waveform) else np.asarray(audio)
    n_frames = values.shape[1]
    max_start = min(n_frames - frames, len(samples) // hop - frames)
    if max_start < 0:
        raise TooShortError(
            f"utterance too short: {n_frames} frames / {len(samples)} samples for a "
            f"{frames}-frame window at hop {hop}"
        )
    f0 = int(rng.integers(0, max_start + 1))
    return values[:, f0 : f0 + frames], samples[f0 * hop : (f0 + frames) * hop]


# ---------------------------------------------------------------- caches & manifests


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_feature_cache(path, m: MelSpectrogram) -> None:
    """Binary MEL1 file plus a JSON sidecar with the same stem."""
    path = Path(path)
    values = np.ascontiguousarray(m.values, dtype="<f4")
    header = MEL_MAGIC + struct.pack("<II", values.shape[0], values.shape[1])
    atomic_write_bytes(path, header + values.tobytes())
    meta = {"config_hash": m.config_hash, "norm": m.norm,
            "stats": list(m.stats) if m.stats is not None else None}
    atomic_write_bytes(path.with_suffix(".json"), json.dumps(meta, sort_keys=True).encode())


def read_feature_cache(path) -> MelSpectrogram:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != MEL_MAGIC:
        raise ValueError(f"{path}: not a MEL1 feature file")
    n_mels, n_frames = struct.unpack("<II", blob[4:12])
    payload = blob[12:]
    if len(payload) != 4 * n_mels * n_frames:
        raise ValueError(f"{path}: truncated payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(n_mels, n_frames).astype(np.float64)
    meta = json.loads(path.with_suffix(".json").read_text())
    stats = tuple(meta["stats"]) if meta.get("stats") is not None else None
    return MelSpectrogram(values, meta["config_hash"], meta["norm"], stats)


def read_manifest(path) -> list:
    items = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            item = json.loads(line)
            for key in ("id", "wav", "speaker", "split"):
                if key not in item:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            items.append(item)
    return items


def write_manifest(path, items) -> None:
    lines = "".join(json.dumps(it, sort_keys=True) + "\n" for it in items)
    atomic_write_bytes(path, lines.encode())
