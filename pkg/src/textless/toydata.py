"""Bundled synthetic multi-speaker corpus.

Each "phone" is a tone with a weak second harmonic; each speaker scales the
pitch, the loudness and the harmonic balance. Phone sequences are built from a handful of
fixed "words" so that future units are predictable from the past.
"""
from __future__ import annotations

import numpy as np

PHONE_FREQS = [250.0, 320.0, 400.0, 480.0, 560.0, 650.0, 740.0, 850.0]
PHONE_SYMBOLS = "aeiouyrl"
WORDS = [(0, 1, 2), (3, 4), (5, 6, 7, 1), (2, 0), (6, 3, 5)]


def speaker_params(n_speakers):
    """(pitch scale, loudness, second-harmonic weight) per speaker."""
    if n_speakers == 1:
        return np.ones(1), np.full(1, 0.35), np.full(1, 0.1)
    return (np.linspace(0.85, 1.15, n_speakers), np.linspace(0.25, 0.45, n_speakers),
            np.linspace(0.0, 0.2, n_speakers))


def synth_units(units, speaker, n_speakers, samples_per_unit, sample_rate, rng,
                noise=0.003):
    """Render a unit (phone id) sequence to audio with continuous phase."""
    pitch, loud, harm = speaker_params(n_speakers)
    freqs = np.array([PHONE_FREQS[int(u) % len(PHONE_FREQS)] for u in units]) * pitch[speaker]
    f = np.repeat(freqs, samples_per_unit)
    phase = 2 * np.pi * np.cumsum(f) / sample_rate
    x = loud[speaker] * ((1 - harm[speaker]) * np.sin(phase) + harm[speaker] * np.sin(2 * phase))
    return x + noise * rng.standard_normal(len(f))


def make_corpus(n_speakers=4, utts_per_speaker=24, test_per_speaker=4, sample_rate=4000,
                hop=16, min_units=40, max_units=60, seed=0):
    """List of utterance dicts with audio, ground-truth units and phone alignment."""
    rng = np.random.default_rng(seed)
    spu = 2 * hop
    items = []
    for spk in range(n_speakers):
        for k in range(utts_per_speaker + test_per_speaker):
            target = int(rng.integers(min_units, max_units + 1))
            units, phones = [], []
            while len(units) < target:
                for p in WORDS[int(rng.integers(len(WORDS)))]:
                    dur = int(rng.integers(2, 5))
                    phones.append((len(units), len(units) + dur, p))
                    units.extend([p] * dur)
            units = units[:target]
            phones = [(a, min(b, target), p) for a, b, p in phones if a < target]
            audio = synth_units(units, spk, n_speakers, spu, sample_rate, rng)
            # trailing room so the last unit still gets two full mel frames
            audio = np.concatenate([audio, 0.003 * rng.standard_normal(2 * spu)])
            unit_dur = spu / sample_rate
            items.append({
                "id": f"s{spk}_u{k:03d}",
                "speaker": f"spk{spk}",
                "speaker_index": spk,
                "split": "train" if k < utts_per_speaker else "test",
                "samples": audio,
                "sample_rate": sample_rate,
                "units": np.asarray(units, dtype=np.int64),
                "transcript": "".join(PHONE_SYMBOLS[p] for _, _, p in phones),
                "alignment": [[a * unit_dur, b * unit_dur, PHONE_SYMBOLS[p]] for a, b, p in phones],
            })
    return items


def recognize_tones(samples, speaker_index, n_speakers, samples_per_unit, sample_rate):
    """Toy recognizer: nearest phone tone per unit block, runs collapsed.

    Stands in for an external ASR model when scoring synthetic speech.
    """
    pitch = speaker_params(n_speakers)[0][speaker_index]
    n = len(samples) // samples_per_unit
    if n == 0:
        return ""
    blocks = np.asarray(samples[: n * samples_per_unit]).reshape(n, samples_per_unit)
    nfft = 8 * samples_per_unit
    spec = np.abs(np.fft.rfft(blocks * np.hanning(samples_per_unit), n=nfft, axis=1))
    peak = np.fft.rfftfreq(nfft, 1.0 / sample_rate)[np.argmax(spec[:, 1:], axis=1) + 1] / pitch
    phones = np.argmin(np.abs(peak[:, None] - np.asarray(PHONE_FREQS)[None]), axis=1)
    # blocks far quieter than the utterance median count as silence
    energy = np.sqrt(np.mean(blocks ** 2, axis=1))
    phones = phones[energy > 0.2 * np.median(energy)]
    if phones.size == 0:
        return ""
    keep = np.r_[True, phones[1:] != phones[:-1]]
    return "".join(PHONE_SYMBOLS[p] for p in phones[keep])
