"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import json
import math
import statistics
import time

import numpy as np
import pytest

from textless.checkpoint import load_checkpoint, load_into_model
from textless.cli import main
from textless.config import PRESETS, ConfigError, build_config
from textless.metrics import (
    AbxItem, abx_error, abx_triplet_count, bitrate, dtw_distance, edit_distance, ls_mse, psnr, ssim,
)
from textless.models.encoder import Encoder, EncoderConfig, InfoNCE
from textless.models.train import encoder_sampler
from textless.models.vocoder import Vocoder, VocoderConfig
from textless.nn import LSTM, Conv1d, Embedding, Linear, grad_check, softmax_xent
from textless.schedules import lr_at, lr_curve, multistep_preset, oclr_preset, run_lr_range_test
from textless.upsample import upsample_fourier_pad, upsample_fourier_tile


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, t0):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  "
                  f"({time.perf_counter() - t0:.1f}s)")
        assert ok, detail
    return emit


def test_criterion_01_dsp_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst_tile = worst_pad = 0.0
    for _ in range(1000):
        t, s = int(rng.integers(1, 40)), int(rng.integers(2, 6))
        x = rng.normal(size=t)
        zi = np.zeros(s * t)
        zi[::s] = x
        worst_tile = max(worst_tile, np.max(np.abs(upsample_fourier_tile(x, s) - zi)))
        worst_pad = max(worst_pad, np.max(np.abs(upsample_fourier_pad(x, s)[::s] - x)))
    n = np.arange(4)
    got = upsample_fourier_pad(np.cos(2 * np.pi * n / 4), 2)
    cos_err = np.max(np.abs(got - np.cos(2 * np.pi * np.arange(8) / 8)))
    ok = max(worst_tile, worst_pad, cos_err) < 1e-9 and time.perf_counter() - t0 < 5
    report(1, ok, f"tile {worst_tile:.1e}, pad {worst_pad:.1e}, cos {cos_err:.1e}", t0)


def test_criterion_02_scale_chain_presets(report):
    t0 = time.perf_counter()
    want = {"table2-row0": (2, 160, 160), "table2-row1": (16, 20, 160),
            "table2-row4": (16, 16, 128), "table2-row5": (10, 16, 80),
            "table3-row3": (10, 16, 80), "table4-row1": (16, 16, 128)}
    got = {}
    for name in want:
        v = build_config({"preset": name}).vocoder
        got[name] = (v.s1, v.s2, v.hop)
    rejected = False
    try:
        build_config({"preset": "table2-row1", "vocoder": {"hop": 128}, "features": {"hop": 128}})
    except ConfigError as exc:
        rejected = "2*hop" in str(exc)
    ok = got == want and rejected and time.perf_counter() - t0 < 1
    report(2, ok, f"{len(got)} geometries validate, mismatched chain rejected={rejected}", t0)


def test_criterion_03_scheduler_contracts(report):
    t0 = time.perf_counter()
    ms, oc = multistep_preset(), oclr_preset()
    flat = all(lr_at(ms, k) == 4e-4 for k in (0, 1, 25_000, 49_999))
    last = lr_at(ms, 150_000) == 1.25e-5
    curve = lr_curve(oc)
    peak = curve[:, 1].max() == 4e-3
    ends = lr_at(oc, oc.total_steps) == oc.final_lr
    steps = np.random.default_rng(0).integers(0, oc.total_steps, size=200)
    pure = [lr_at(oc, int(k)) for k in steps] == [curve[int(k), 1] for k in steps]
    ok = flat and last and peak and ends and pure and time.perf_counter() - t0 < 1
    report(3, ok, f"multistep flat={flat} last={last}; oclr peak={peak} end={ends} pure={pure}", t0)


def _quadratic(lam, seed=0):
    w = [1.0]

    def step(xi, lr):
        loss = 0.5 * lam * (w[0] - xi) ** 2
        w[0] -= lr * lam * (w[0] - xi)
        return loss

    rng = np.random.default_rng(seed)
    return step, iter(lambda: rng.normal(0, 0.1), None)


def test_criterion_04_lrrt_stability_bound(report):
    t0 = time.perf_counter()
    ratios = []
    for lam in (0.5, 5.0, 50.0):
        for rate in (1, 5, 50):
            step, data = _quadratic(lam)
            rep = run_lr_range_test(step, data, 1e-4, 1e2, rate)
            ratios.append(rep.explosion_lr / (2 / lam) if rep.exploded else math.inf)
    ok = all(0.5 <= r <= 2 for r in ratios) and time.perf_counter() - t0 < 30
    report(4, ok, f"explosion/bound ratios in [{min(ratios):.2f}, {max(ratios):.2f}] over 9 runs", t0)


class _Xent:
    def __init__(self, target):
        self.target = target

    def params(self):
        return []

    def zero_grad(self):
        pass

    def forward(self, logits):
        loss, self._g = softmax_xent(logits, self.target)
        return np.array(loss)

    def backward(self, r):
        return self._g * r


def test_criterion_05_gradient_checks(report):
    t0 = time.perf_counter()
    f64 = np.float64
    rng = np.random.default_rng(0)
    errs = {
        "linear": grad_check(Linear(4, 3, rng, f64), lambda r: r.normal(size=(2, 3, 4))),
        "conv1d": grad_check(Conv1d(3, 4, 4, rng, stride=2, padding=1, dtype=f64),
                             lambda r: r.normal(size=(2, 3, 10))),
        "embedding": grad_check(Embedding(6, 3, rng, f64), lambda r: r.integers(0, 6, size=(2, 5))),
        "softmax_xent": grad_check(_Xent(np.array([1, 0, 3])), lambda r: r.normal(size=(3, 5))),
    }
    lstm_err = grad_check(LSTM(3, 4, rng, f64), lambda r: r.normal(size=(2, 5, 3)))
    ok = max(errs.values()) < 1e-6 and lstm_err < 1e-5 and time.perf_counter() - t0 < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", lstm(5 steps) {lstm_err:.1e}"
    report(5, ok, detail, t0)


def _mels(prep_dir, split):
    from textless.audio import read_feature_cache, read_manifest
    rows = read_manifest(prep_dir / "manifest.jsonl")
    return [read_feature_cache(prep_dir / "features" / f"{r['id']}.mel").values
            for r in rows if r["split"] == split]


def test_criterion_06_vq_cpc_sanity(report, tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    n_neg = 16
    preds = rng.normal(size=(8, 40, 4, 16)) * 1e-3
    init_loss, _ = InfoNCE(4, n_neg).forward(preds, rng.normal(size=(8, 40, 16)), rng)
    init_ok = abs(init_loss - math.log(n_neg + 1)) < 0.1 * math.log(n_neg + 1)
    # untrained toy encoder on real features
    cfg = build_config({"preset": "toy"})
    assert main(["prep", "--out-dir", str(tmp_path)]) == 0
    test_mels = _mels(tmp_path / "prep", "test")
    batch = encoder_sampler(test_mels, cfg.encoder.frames, 32)(np.random.default_rng(1234))
    untrained = Encoder(cfg.encoder, np.random.default_rng(0))
    model_init_loss, _ = untrained.evaluate(batch, np.random.default_rng(1))
    assert main(["train-encoder", "--out-dir", str(tmp_path)]) == 0
    enc = Encoder(cfg.encoder, np.random.default_rng(0))
    load_into_model(enc, load_checkpoint(tmp_path / "encoder" / "encoder.zvck"))
    _, acc = enc.evaluate(batch, np.random.default_rng(1))
    chance = 1 / (cfg.encoder.n_negatives + 1)
    init_ok = init_ok and abs(model_init_loss - math.log(n_neg + 1)) < 0.1 * math.log(n_neg + 1)
    ok = init_ok and acc > 2 * chance and time.perf_counter() - t0 < 300
    report(6, ok, f"init loss {init_loss:.3f} vs ln17 {math.log(17):.3f} (toy model {model_init_loss:.3f}); "
                  f"held-out accuracy {acc:.3f} vs 2x chance {2 * chance:.3f}", t0)


def _toy_vocoder_nll(out, preset, seed):
    args = ["--preset", preset, "--seed", str(seed), "--out-dir", str(out),
            "--set", 'train.unit_source="ground_truth"']
    assert main(["prep", *args]) == 0
    assert main(["train-vocoder", *args]) == 0
    return json.loads((out / "vocoder" / "metrics.json").read_text())


@pytest.mark.slow
def test_criterion_07_oclr_step_reduction(report, tmp_path):
    t0 = time.perf_counter()
    oclr, multi = [], []
    for seed in (0, 1, 2):
        m = _toy_vocoder_nll(tmp_path / f"ms{seed}", "toy-multistep", seed)
        o = _toy_vocoder_nll(tmp_path / f"oc{seed}", "toy", seed)
        assert o["steps"] == round(0.3 * m["steps"])
        multi.append(m["val_nll"])
        oclr.append(o["val_nll"])
    mo, mm = statistics.median(oclr), statistics.median(multi)
    ok = mo <= mm and time.perf_counter() - t0 < 1800
    report(7, ok, f"median val NLL: oclr@300 {mo:.3f} vs multistep@1000 {mm:.3f} "
                  f"(per seed {[round(x, 3) for x in oclr]} vs {[round(x, 3) for x in multi]})", t0)


def test_criterion_08_geometry(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    checked, bad = 0, []
    small = dict(n_codes=8, code_dim=4, speaker_dim=4, lstm_hidden=8, head_hidden=8, tile_conv=False)
    for name in sorted(PRESETS):
        v = build_config({"preset": name}).vocoder
        voc = Vocoder(VocoderConfig(**{**v.to_dict(), **small}), np.random.default_rng(0))
        n = int(rng.integers(1, 4))
        got = len(voc.generate(rng.integers(0, 8, size=n), 0))
        checked += 1
        if got != n * 2 * v.hop:
            bad.append((name, got, n * 2 * v.hop))
    enc = Encoder(EncoderConfig(n_mels=6, channels=4, z_dim=3, n_codes=8, context_dim=4),
                  np.random.default_rng(0))
    voc = Vocoder(VocoderConfig(**{**VocoderConfig(hop=16, s1=4, s2=8).to_dict(), **small}),
                  np.random.default_rng(0))
    for _ in range(10):
        t = int(rng.integers(2, 60))
        _, seq = enc.encode(rng.random((6, t)))
        samples = len(voc.generate(seq.indices, 0))
        if len(seq.indices) != t // 2 or samples != (t // 2) * 32:
            bad.append(("bookkeeping", t, samples))
    ok = not bad and time.perf_counter() - t0 < 10
    report(8, ok, f"{checked} presets + 10 random lengths, mismatches {bad}", t0)


def test_criterion_09_metrics(report):
    t0 = time.perf_counter()
    a = np.random.default_rng(0).random((20, 30)) * 0.8
    checks = {
        "psnr20": math.isclose(psnr(a, a + 0.1), 20.0, rel_tol=1e-12),
        "ssim_id": ssim(a, a) == 1.0,
        "ssim_const": math.isclose(ssim(np.zeros((10, 10)), np.ones((10, 10))), 9.999e-5, rel_tol=1e-3),
        "kitten": edit_distance("kitten", "sitting") == 3,
        "bitrate200": bitrate([np.tile([0, 1, 2, 3], 50)], 2.0) == 200.0,
        "dtw": dtw_distance([1.0], [2.0], "abs") == 1.0
        and dtw_distance([0.0, 1.0], [0.0, 0.0, 1.0, 1.0], "abs") == 0.0,
        "mse": math.isclose(ls_mse(a, a + 0.1), 0.01, rel_tol=1e-12),
    }
    rng = np.random.default_rng(7)

    def clusters(n, offset):
        return [AbxItem(c + rng.normal(scale=0.3, size=(int(rng.integers(2, 5)), 2)), cat, "s0")
                for cat, c in (("a", 0.0), ("b", offset)) for _ in range(n)]

    sep = abx_error(clusters(10, 10.0), "within", "euclidean")
    same_items = clusters(20, 0.0)
    same = abx_error(same_items, "within", "euclidean")
    checks["abx_sep"] = sep == 0.0
    checks["abx_chance"] = abs(same - 50.0) <= 3.0 and abx_triplet_count(same_items, "within") >= 10_000
    ok = all(checks.values()) and time.perf_counter() - t0 < 120
    failed = [k for k, v in checks.items() if not v]
    report(9, ok, f"closed forms ok, ABX separable {sep:.1f}%, identical {same:.1f}%, failed {failed}", t0)


def _small_run(out):
    argv = ["--out-dir", str(out), "--threads", "1", "--set", "data.utts_per_speaker=4",
            "--set", "data.test_per_speaker=1", "--set", "encoder.steps=30",
            "--set", "scheduler.total_steps=30"]
    for cmd in ("prep", "train-encoder", "encode", "train-vocoder", "synth",
                "eval-units", "eval-audio", "eval-text"):
        assert main([cmd, *argv]) == 0


def test_criterion_10_reproducibility(report, tmp_path):
    t0 = time.perf_counter()
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        _small_run(d)
    files = ["encoder/encoder.zvck", "vocoder/vocoder.zvck", "eval/units.csv", "eval/audio.csv",
             "eval/text.csv"]
    differ = [f for f in files if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()]
    ok = not differ
    report(10, ok, f"{len(files)} checkpoints/CSVs compared, differing {differ}", t0)
