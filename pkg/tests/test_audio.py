import struct
import wave

import numpy as np
import pytest

from textless.audio import (
    FeatureConfig, MelSpectrogram, TooShortError, WavFormatError, Waveform, denormalize,
    global_stats, load_wav, log_mel, mel_centers, minmax_normalize, mulaw_decode, mulaw_encode,
    n_frames_for, read_feature_cache, read_manifest, resample, sample_training_window, save_wav,
    write_feature_cache, write_manifest,
)


def _write_pcm(path, values, rate=16000, channels=1):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(values, dtype="<i2").tobytes())


def test_load_wav_scaling(tmp_path):
    p = tmp_path / "a.wav"
    _write_pcm(p, [0, 16384, -32768])
    w = load_wav(p)
    assert w.samples.tolist() == [0.0, 0.5, -1.0]
    assert w.sample_rate == 16000


def test_load_wav_one_second(tmp_path):
    p = tmp_path / "a.wav"
    _write_pcm(p, np.zeros(16000, dtype=np.int16))
    w = load_wav(p)
    assert len(w) == 16000 and w.sample_rate == 16000 and w.duration == 1.0


def test_load_wav_first_channel(tmp_path):
    p = tmp_path / "st.wav"
    _write_pcm(p, [100, -5, 200, -5], channels=2)
    assert load_wav(p).samples.tolist() == [100 / 32768, 200 / 32768]


def test_load_wav_errors(tmp_path):
    trunc = tmp_path / "t.wav"
    trunc.write_bytes(b"RIFF\x10\x00\x00\x00WAVEfm")
    with pytest.raises(WavFormatError, match="malformed WAV"):
        load_wav(trunc)
    empty = tmp_path / "e.wav"
    _write_pcm(empty, [])
    with pytest.raises(WavFormatError, match="zero-length"):
        load_wav(empty)
    # 8-bit PCM is not supported
    eight = tmp_path / "8.wav"
    with wave.open(str(eight), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(1)
        wf.setframerate(8000)
        wf.writeframes(bytes([128, 130, 126]))
    with pytest.raises(WavFormatError, match="unsupported codec"):
        load_wav(eight)
    # IEEE float format tag
    flt = tmp_path / "f.wav"
    data = struct.pack("<3f", 0.0, 0.5, -0.5)
    fmt = struct.pack("<HHIIHH", 3, 1, 8000, 32000, 4, 32)
    flt.write_bytes(b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(data)) + b"WAVE"
                    + b"fmt " + struct.pack("<I", len(fmt)) + fmt
                    + b"data" + struct.pack("<I", len(data)) + data)
    with pytest.raises(WavFormatError, match="unsupported codec"):
        load_wav(flt)


def test_save_load_roundtrip(tmp_path):
    x = np.round(np.linspace(-1, 0.99, 101) * 32768) / 32768
    save_wav(tmp_path / "r.wav", Waveform(x, 8000))
    w = load_wav(tmp_path / "r.wav")
    np.testing.assert_array_equal(w.samples, x)


def test_waveform_rejects_nonfinite():
    with pytest.raises(ValueError):
        Waveform([0.0, np.nan], 16000)
    with pytest.raises(ValueError):
        Waveform([0.0], 0)


def test_resample_identity_and_dc():
    w = Waveform(np.random.default_rng(0).uniform(-1, 1, 100), 8000)
    np.testing.assert_array_equal(resample(w, 8000).samples, w.samples)
    c = resample(Waveform(np.full(800, 0.3), 8000), 16000)
    assert c.sample_rate == 16000 and len(c) == 1600
    assert np.max(np.abs(c.samples - 0.3)) < 1e-4


def test_resample_sinusoid_interior():
    n = np.arange(8000)
    w = Waveform(np.sin(2 * np.pi * 440 * n / 8000), 8000)
    out = resample(w, 16000)
    m = np.arange(len(out))
    ref = np.sin(2 * np.pi * 440 * m / 16000)
    assert abs(len(out) / 16000 - w.duration) <= 1 / 16000
    # the filter transient at the two ends is excluded
    interior = slice(200, len(out) - 200)
    assert np.max(np.abs(out.samples[interior] - ref[interior])) < 1e-3


def test_mulaw_examples():
    assert mulaw_encode(0.0) == 128
    assert mulaw_encode(1.0) == 255 and mulaw_encode(-1.0) == 0
    x = np.random.default_rng(0).uniform(-1, 1, 1000)
    codes = mulaw_encode(x)
    order = np.argsort(x)
    assert np.all(np.diff(codes[order]) >= 0)
    small = np.abs(x) < 0.01
    assert np.max(np.abs(mulaw_decode(codes[small]) - x[small])) < 1 / 255


def test_mulaw_matches_formula_oracle():
    for x in np.linspace(-1, 1, 41):
        f = np.sign(x) * np.log(1 + 255 * abs(x)) / np.log(256)
        q = min(255, max(0, int(np.floor((f + 1) / 2 * 255 + 0.5))))
        assert mulaw_encode(x) == q


def test_log_mel_silence_and_frames():
    cfg = FeatureConfig(sample_rate=16000, hop=160)
    m = log_mel(Waveform(np.zeros(cfg.win_length + 320), 16000), cfg)
    assert np.all(m.values == np.log(cfg.log_floor))
    x = np.random.default_rng(1).normal(size=5120 + cfg.win_length - 1) * 0.1
    assert log_mel(Waveform(x, 16000), cfg).n_frames == 32
    assert n_frames_for(5120 + cfg.win_length - 1, cfg) == 32
    with pytest.raises(TooShortError):
        log_mel(Waveform(np.zeros(cfg.win_length - 1), 16000), cfg)


@pytest.mark.parametrize("k", [5, 20, 40, 60, 75])
def test_tone_at_filter_center(k):
    cfg = FeatureConfig()
    f0 = mel_centers(cfg)[k]
    t = np.arange(cfg.win_length * 4) / cfg.sample_rate
    m = log_mel(Waveform(0.5 * np.sin(2 * np.pi * f0 * t), cfg.sample_rate), cfg)
    assert np.all(np.argmax(m.values, axis=0) == k)


def test_feature_config_validation():
    with pytest.raises(ValueError):
        FeatureConfig(hop=1000)
    with pytest.raises(ValueError):
        FeatureConfig(fmin=9000.0)
    assert FeatureConfig().config_hash() != FeatureConfig(hop=80).config_hash()


def test_minmax_examples():
    m = MelSpectrogram(np.array([[0.0, 5.0, 10.0]]), "h")
    assert minmax_normalize(m).values.tolist() == [[0.0, 0.5, 1.0]]
    c = minmax_normalize(MelSpectrogram(np.full((3, 4), 2.0), "h"))
    assert np.all(c.values == 0.0)
    r = np.random.default_rng(2).normal(size=(4, 9))
    back = denormalize(minmax_normalize(MelSpectrogram(r, "h")))
    assert np.max(np.abs(back.values - r)) < 1e-12
    a = MelSpectrogram(np.array([[1.0, 3.0]]), "h")
    b = MelSpectrogram(np.array([[-1.0, 2.0]]), "h")
    assert global_stats([a, b]) == (-1.0, 3.0)


@pytest.mark.parametrize("frames,hop,expected", [(32, 160, 5120), (102, 80, 8160), (64, 128, 8192)])
def test_training_window(frames, hop, expected):
    rng = np.random.default_rng(0)
    mel = np.arange(200)[None, :] * np.ones((3, 1))
    audio = np.arange(200 * hop, dtype=float)
    ms, au = sample_training_window(mel, audio, frames, hop, rng)
    assert ms.shape == (3, frames) and len(au) == expected
    assert au[0] == ms[0, 0] * hop


def test_feature_cache_roundtrip(tmp_path):
    m = MelSpectrogram(np.random.default_rng(3).random((5, 7)), "abc", "minmax", (-3.0, 1.0))
    write_feature_cache(tmp_path / "x.mel", m)
    r = read_feature_cache(tmp_path / "x.mel")
    np.testing.assert_allclose(r.values, m.values, atol=1e-7)
    assert r.config_hash == "abc" and r.stats == (-3.0, 1.0) and r.norm == "minmax"


def test_manifest_roundtrip_and_errors(tmp_path):
    items = [{"id": "a", "wav": "a.wav", "speaker": "s", "split": "train"}]
    write_manifest(tmp_path / "m.jsonl", items)
    assert read_manifest(tmp_path / "m.jsonl") == items
    (tmp_path / "bad.jsonl").write_text('{"id": "a"}\n')
    with pytest.raises(ValueError, match="missing field"):
        read_manifest(tmp_path / "bad.jsonl")
