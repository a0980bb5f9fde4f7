"""Experiment commands. Each reads and writes only its own artifact directories.

Layout under ``out_dir``::

    prep/     manifest.jsonl, wav/, features/, stats.json
    lrrt/     records.csv, report.json, lrrt.svg
    encoder/  encoder.zvck, loss.csv, loss.svg
    encode/   units.jsonl, context/<id>.npy
    vocoder/  vocoder.zvck, loss.csv, loss.svg, metrics.json
    synth/    <id>.wav
    eval/     units.csv, audio.csv, text.csv, asr.jsonl
    sched/    schedule.csv, schedule.svg

Every command also writes ``run-<command>.json`` in its directory with the
config hash, seed, wall time and sha256 of every file it produced.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from pathlib import Path

import numpy as np

from textless import toydata
from textless.audio import (
    Waveform, atomic_write_bytes, global_stats, load_wav, log_mel, minmax_normalize,
    read_feature_cache, read_manifest, resample, wav_bytes,
    write_feature_cache, write_manifest,
)
from textless.checkpoint import (
    load_checkpoint, load_into_model, restore_state, save_checkpoint,
    state_to_checkpoint,
)
from textless.config import RunConfig
from textless.metrics import (
    CSV_HEADER, AbxItem, MetricReport, abx_error, bitrate,
    corpus_error_rate, ls_mse, psnr, ssim,
)
from textless.models.encoder import Encoder
from textless.models.train import (
    encoder_sampler, new_state, run_training, vocoder_eval_nll, vocoder_sampler,
)
from textless.models.vocoder import Vocoder
from textless.nn.optim import Adam, clip_grad_norm
from textless.schedules import lr_curve, oclr_preset, run_lr_range_test
from textless.svg import line_chart

COMMANDS = ("prep", "lrrt", "train-encoder", "train-vocoder", "encode", "synth",
            "eval-units", "eval-audio", "eval-text", "sched-preview")


class DataError(RuntimeError):
    """Missing or malformed input data or upstream artifacts."""


class Run:
    """Collects the outputs of one command and writes its run manifest."""

    def __init__(self, out_dir, subdir, command, cfg: RunConfig):
        self.root = Path(out_dir)
        self.dir = self.root / subdir
        self.command, self.cfg = command, cfg
        self.outputs = {}
        self.extra = {}
        self.t0 = time.perf_counter()

    def write(self, relpath, data: bytes):
        path = self.dir / relpath
        atomic_write_bytes(path, data)
        self.outputs[str(relpath)] = hashlib.sha256(data).hexdigest()
        return path

    def write_text(self, relpath, text: str):
        return self.write(relpath, text.encode())

    def write_json(self, relpath, obj):
        return self.write_text(relpath, json.dumps(obj, sort_keys=True, indent=1) + "\n")

    def write_csv(self, relpath, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return self.write_text(relpath, buf.getvalue())

    def write_npy(self, relpath, arr):
        buf = io.BytesIO()
        np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
        return self.write(relpath, buf.getvalue())

    def register(self, relpath):
        """Record the hash of a file written by another helper."""
        data = (self.dir / relpath).read_bytes()
        self.outputs[str(relpath)] = hashlib.sha256(data).hexdigest()

    def finish(self):
        manifest = {
            "command": self.command,
            "preset": self.cfg.preset,
            "seed": self.cfg.seed,
            "config_hash": self.cfg.config_hash(),
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
            "outputs": dict(sorted(self.outputs.items())),
            **self.extra,
        }
        atomic_write_bytes(self.dir / f"run-{self.command}.json",
                           (json.dumps(manifest, sort_keys=True, indent=1) + "\n").encode())
        return manifest


def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DataError(f"missing upstream artifact {path} (run `textless {producer}` first)")
    return path


def _dtype(precision):
    return np.float64 if precision == "f64" else np.float32


# ---------------------------------------------------------------- prep


def _synthetic_items(cfg: RunConfig):
    d, f = cfg.data, cfg.features
    return toydata.make_corpus(n_speakers=d.n_speakers, utts_per_speaker=d.utts_per_speaker,
                               test_per_speaker=d.test_per_speaker, sample_rate=f.sample_rate,
                               hop=f.hop, min_units=d.min_units, max_units=d.max_units,
                               seed=cfg.seed)


def _manifest_items(cfg: RunConfig):
    path = Path(cfg.data.manifest)
    try:
        rows = read_manifest(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    speakers = sorted({r["speaker"] for r in rows})
    items = []
    for r in rows:
        wav = Path(r["wav"])
        if not wav.is_absolute():
            wav = path.parent / wav
        try:
            w = load_wav(wav)
        except OSError as exc:
            raise DataError(f"{r['id']}: {exc}") from exc
        if w.sample_rate != cfg.features.sample_rate:
            w = resample(w, cfg.features.sample_rate)
        item = dict(r)
        item.update(samples=w.samples, sample_rate=w.sample_rate,
                    speaker_index=speakers.index(r["speaker"]))
        if "units" in item:
            item["units"] = np.asarray(item["units"], dtype=np.int64)
        items.append(item)
    return items


def chunk_items(items, chunk_seconds, samples_per_unit):
    """Split utterances at unit boundaries into chunks of about ``chunk_seconds``.

    A tail shorter than half a chunk joins the previous chunk. Units and
    alignments are sliced with the audio; a transcript survives only when it
    can be rebuilt from the alignment.
    """
    out = []
    for it in items:
        sr = it["sample_rate"]
        step = max(1, round(chunk_seconds * sr / samples_per_unit)) * samples_per_unit
        n = len(it["samples"])
        bounds = list(range(0, n, step)) + [n]
        if len(bounds) > 2 and bounds[-1] - bounds[-2] < step // 2:
            del bounds[-2]
        if len(bounds) == 2:
            out.append(it)
            continue
        for k, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
            c = {key: v for key, v in it.items() if key not in ("units", "alignment", "transcript")}
            c.update(id=f"{it['id']}_c{k:02d}", samples=it["samples"][a:b])
            if "units" in it:
                c["units"] = np.asarray(it["units"])[a // samples_per_unit : b // samples_per_unit]
            if "alignment" in it:
                t0, t1 = a / sr, b / sr
                segs = [[max(s, t0) - t0, min(e, t1) - t0, sym] for s, e, sym in it["alignment"]
                        if min(e, t1) > max(s, t0)]
                c["alignment"] = segs
                c["transcript"] = "".join(sym for _, _, sym in segs)
            out.append(c)
    return out


def prep(cfg: RunConfig, out_dir):
    run = Run(out_dir, "prep", "prep", cfg)
    items = _manifest_items(cfg) if cfg.data.manifest else _synthetic_items(cfg)
    if cfg.data.chunk_seconds is not None:
        items = chunk_items(items, cfg.data.chunk_seconds, 2 * cfg.features.hop)
    if not any(it["split"] == "train" for it in items):
        raise DataError("no training utterances in the data set")
    n_spk = len({it["speaker"] for it in items})
    if n_spk > cfg.vocoder.n_speakers:
        raise DataError(f"{n_spk} speakers exceed vocoder.n_speakers={cfg.vocoder.n_speakers}")
    logs = {}
    for it in items:
        logs[it["id"]] = log_mel(Waveform(it["samples"], it["sample_rate"]), cfg.features)
    stats = global_stats(logs[it["id"]] for it in items if it["split"] == "train")
    rows = []
    for it in items:
        run.write(f"wav/{it['id']}.wav",
                  wav_bytes(Waveform(np.clip(it["samples"], -1.0, 1.0), it["sample_rate"])))
        mel = minmax_normalize(logs[it["id"]], stats)
        write_feature_cache(run.dir / f"features/{it['id']}.mel", mel)
        run.register(f"features/{it['id']}.mel")
        run.register(f"features/{it['id']}.json")
        row = {"id": it["id"], "wav": f"wav/{it['id']}.wav", "speaker": it["speaker"],
               "speaker_index": it["speaker_index"], "split": it["split"],
               "n_frames": int(mel.values.shape[1])}
        for key in ("transcript", "alignment"):
            if key in it:
                row[key] = it[key]
        if "units" in it:
            row["units"] = [int(u) for u in it["units"]]
        rows.append(row)
    write_manifest(run.dir / "manifest.jsonl", rows)
    run.register("manifest.jsonl")
    run.write_json("stats.json", {"log_min": stats[0], "log_max": stats[1],
                                  "feature_hash": cfg.features.config_hash()})
    run.extra["n_items"] = len(rows)
    return run.finish()


def _load_prep(out_dir):
    pdir = Path(out_dir) / "prep"
    rows = read_manifest(_need(pdir / "manifest.jsonl", "prep"))
    stats = json.loads(_need(pdir / "stats.json", "prep").read_text())
    return pdir, rows, (stats["log_min"], stats["log_max"])


def _load_mel(pdir, row):
    return read_feature_cache(_need(pdir / "features" / f"{row['id']}.mel", "prep")).values


def _load_audio(pdir, row):
    return load_wav(_need(pdir / row["wav"], "prep")).samples


# ---------------------------------------------------------------- training


def _loss_artifacts(run, state, extra_names, title):
    header = ["step", "lr", "loss", "grad_norm"] + list(extra_names)
    rows = [[r[0]] + [repr(float(v)) for v in r[1:]] for r in state.log_rows]
    run.write_csv("loss.csv", header, rows)
    steps = [r[0] for r in state.log_rows]
    run.write_text("loss.svg", line_chart({"loss": (steps, [r[2] for r in state.log_rows])},
                                          title=title, xlabel="step", ylabel="loss"))


def _train(run, state, sample, schedule, ckpt_name, kind, resume, cfg, log_every,
           checkpoint_every):
    ckpt_path = run.dir / ckpt_name
    if resume and ckpt_path.exists():
        restore_state(state, load_checkpoint(ckpt_path))
        log_csv = run.dir / "loss.csv"
        if log_csv.exists():
            with open(log_csv) as fh:
                rows = list(csv.reader(fh))[1:]
            state.log_rows = [(int(r[0]),) + tuple(float(v) for v in r[1:]) for r in rows]

    def on_checkpoint(s):
        save_checkpoint(ckpt_path, state_to_checkpoint(s, cfg.to_dict(), kind))

    run_training(state, sample, schedule, clip=cfg.train.clip_norm, log_every=log_every,
                 on_checkpoint=on_checkpoint, checkpoint_every=checkpoint_every)
    save_checkpoint(ckpt_path, state_to_checkpoint(state, cfg.to_dict(), kind))
    run.register(ckpt_name)


def encoder_schedule(cfg: RunConfig):
    return oclr_preset(cfg.encoder.steps, max_lr=cfg.encoder.max_lr)


def train_encoder(cfg: RunConfig, out_dir, precision="f32", resume=False):
    pdir, rows, _ = _load_prep(out_dir)
    run = Run(out_dir, "encoder", "train-encoder", cfg)
    mels = [_load_mel(pdir, r) for r in rows if r["split"] == "train"]
    try:
        sample = encoder_sampler(mels, cfg.encoder.frames, cfg.encoder.batch_size)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    model = Encoder(cfg.encoder, np.random.default_rng(cfg.seed), _dtype(precision))
    state = new_state(model, cfg.seed + 1)
    _train(run, state, sample, encoder_schedule(cfg), "encoder.zvck", "encoder", resume, cfg,
           cfg.train.log_every, cfg.train.checkpoint_every)
    _loss_artifacts(run, state, ["nce", "vq", "commit", "accuracy"], "encoder loss")
    run.extra.update(steps=state.step, train_wall_time_s=round(state.wall_time, 3))
    return run.finish()


def _load_encoder(cfg, out_dir, precision):
    path = _need(Path(out_dir) / "encoder" / "encoder.zvck", "train-encoder")
    model = Encoder(cfg.encoder, np.random.default_rng(cfg.seed), _dtype(precision))
    load_into_model(model, load_checkpoint(path))
    return model


def _unit_items(cfg: RunConfig, out_dir, split=None):
    """Vocoder items (units, speaker_index, samples) joined from prep and encode."""
    pdir, rows, _ = _load_prep(out_dir)
    if cfg.train.unit_source == "ground_truth":
        units = {}
        for r in rows:
            if "units" not in r:
                raise DataError(f"{r['id']}: unit_source=ground_truth needs 'units' in the manifest")
            units[r["id"]] = np.asarray(r["units"], dtype=np.int64)
    else:
        path = _need(Path(out_dir) / "encode" / "units.jsonl", "encode")
        units = {}
        with open(path) as fh:
            for line in fh:
                rec = json.loads(line)
                units[rec["id"]] = np.asarray(rec["indices"], dtype=np.int64)
    items = []
    for r in rows:
        if split is not None and r["split"] != split:
            continue
        if r["id"] not in units:
            raise DataError(f"no units for utterance {r['id']}")
        u = units[r["id"]]
        if u.size and u.max() >= cfg.vocoder.n_codes:
            raise DataError(f"{r['id']}: unit index {u.max()} >= vocoder.n_codes")
        items.append({"id": r["id"], "units": u, "speaker": r["speaker"],
                      "speaker_index": r["speaker_index"], "split": r["split"],
                      "samples": _load_audio(pdir, r)})
    return items


def lrrt(cfg: RunConfig, out_dir, precision="f32", model_kind="vocoder"):
    t = cfg.train
    if model_kind == "encoder":
        pdir, rows, _ = _load_prep(out_dir)
        mels = [_load_mel(pdir, r) for r in rows if r["split"] == "train"]
        sample = encoder_sampler(mels, cfg.encoder.frames, cfg.encoder.batch_size)
        model = Encoder(cfg.encoder, np.random.default_rng(cfg.seed), _dtype(precision))
    else:
        items = _unit_items(cfg, out_dir, "train")
        sample = vocoder_sampler(items, cfg.vocoder, t.batch_size)
        model = Vocoder(cfg.vocoder, np.random.default_rng(cfg.seed), _dtype(precision))
    run = Run(out_dir, "lrrt", "lrrt", cfg)
    rng = np.random.default_rng(cfg.seed + 2)
    optimizer = Adam(model.params())
    params = model.params()

    def step(batch, lr):
        loss, _ = model.loss_and_backward(batch, rng)
        if not np.isfinite(loss):
            return loss
        clip_grad_norm(params, t.clip_norm)
        optimizer.step(lr)
        return loss

    def batches():
        while True:
            yield sample(rng)

    report = run_lr_range_test(step, batches(), t.lrrt_start_lr, t.lrrt_end_lr,
                               t.lrrt_step_rate, num_lrs=t.lrrt_num_lrs)
    run.write_csv("records.csv", ["step", "lr", "loss", "smoothed"],
                  [[r[0]] + [repr(float(v)) for v in r[1:]] for r in report.records])
    run.write_json("report.json", {**report.summary(), "model": model_kind})
    run.write_text("lrrt.svg", line_chart(
        {"smoothed": (report.lrs.tolist(), report.smoothed.tolist()),
         "raw": (report.lrs.tolist(), [r[2] for r in report.records])},
        title=f"LR range test (step rate {t.lrrt_step_rate})", xlabel="learning rate",
        ylabel="loss", logx=True))
    run.extra["suggested_max_lr"] = report.suggested_max_lr
    return run.finish()


def train_vocoder(cfg: RunConfig, out_dir, precision="f32", resume=False):
    items = _unit_items(cfg, out_dir)
    train = [it for it in items if it["split"] == "train"]
    test = [it for it in items if it["split"] != "train"]
    run = Run(out_dir, "vocoder", "train-vocoder", cfg)
    try:
        sample = vocoder_sampler(train, cfg.vocoder, cfg.train.batch_size)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    model = Vocoder(cfg.vocoder, np.random.default_rng(cfg.seed), _dtype(precision))
    state = new_state(model, cfg.seed + 1)
    _train(run, state, sample, cfg.scheduler, "vocoder.zvck", "vocoder", resume, cfg,
           cfg.train.log_every, cfg.train.checkpoint_every)
    _loss_artifacts(run, state, [], "vocoder loss")
    metrics = {"steps": state.step, "train_wall_time_s": round(state.wall_time, 3),
               "schedule": cfg.scheduler.kind}
    if test:
        metrics["val_nll"] = vocoder_eval_nll(model, test, cfg.vocoder)
    run.write_json("metrics.json", {k: v for k, v in metrics.items() if k != "train_wall_time_s"})
    run.extra.update(metrics)
    return run.finish()


def _load_vocoder(cfg, out_dir, precision):
    path = _need(Path(out_dir) / "vocoder" / "vocoder.zvck", "train-vocoder")
    model = Vocoder(cfg.vocoder, np.random.default_rng(cfg.seed), _dtype(precision))
    load_into_model(model, load_checkpoint(path))
    return model


# ---------------------------------------------------------------- inference


def encode(cfg: RunConfig, out_dir, precision="f32"):
    pdir, rows, _ = _load_prep(out_dir)
    model = _load_encoder(cfg, out_dir, precision)
    run = Run(out_dir, "encode", "encode", cfg)
    frame_rate = cfg.features.sample_rate / (2 * cfg.features.hop)
    lines = []
    for r in rows:
        ctx, seq = model.encode(_load_mel(pdir, r), frame_rate, r["speaker"], r["id"])
        lines.append(json.dumps(seq.to_json(), sort_keys=True))
        run.write_npy(f"context/{r['id']}.npy", ctx.astype(np.float32))
    run.write_text("units.jsonl", "\n".join(lines) + "\n")
    return run.finish()


def synth(cfg: RunConfig, out_dir, precision="f32", split="test", target_speaker=None):
    items = _unit_items(cfg, out_dir, split)
    model = _load_vocoder(cfg, out_dir, precision)
    run = Run(out_dir, "synth", "synth", cfg)
    for k, it in enumerate(items):
        spk = it["speaker_index"] if target_speaker is None else int(target_speaker)
        w = model.generate(it["units"], spk, temperature=cfg.eval.temperature, seed=cfg.seed + k)
        run.write(f"{it['id']}.wav", wav_bytes(Waveform(np.clip(w.samples, -1.0, 1.0),
                                                         w.sample_rate)))
    run.extra["n_items"] = len(items)
    return run.finish()


# ---------------------------------------------------------------- evaluation


def _report_rows(reports):
    return [r.row() for r in reports]


def abx_items(rows, contexts, frame_rate, split="test"):
    """Phone segments of context features, one AbxItem per aligned phone."""
    items = []
    for r in rows:
        if r["split"] != split or "alignment" not in r:
            continue
        ctx = contexts[r["id"]]
        for start, end, symbol in r["alignment"]:
            a = int(round(start * frame_rate))
            b = max(int(round(end * frame_rate)), a + 1)
            seg = ctx[a : min(b, len(ctx))]
            if len(seg):
                items.append(AbxItem(seg, symbol, r["speaker"]))
    return items


def eval_units(cfg: RunConfig, out_dir):
    pdir, rows, _ = _load_prep(out_dir)
    edir = Path(out_dir) / "encode"
    seqs = []
    with open(_need(edir / "units.jsonl", "encode")) as fh:
        for line in fh:
            seqs.append(json.loads(line))
    by_id = {s["id"]: s for s in seqs}
    test_ids = [r["id"] for r in rows if r["split"] == "test"] or list(by_id)
    chosen = [by_id[i] for i in test_ids if i in by_id]
    if not chosen:
        raise DataError("no unit sequences to evaluate")
    frame_rate = chosen[0]["frame_rate"]
    duration = sum(len(s["indices"]) for s in chosen) / frame_rate
    conf = {"frame_rate": frame_rate}
    reports = [
        MetricReport("bitrate", bitrate([s["indices"] for s in chosen], duration), "bits/s",
                     len(chosen), conf),
        MetricReport("bitrate_collapsed",
                     bitrate([s["indices"] for s in chosen], duration, collapse_runs=True),
                     "bits/s", len(chosen), {**conf, "collapse_runs": True}),
    ]
    contexts = {i: np.load(_need(edir / "context" / f"{i}.npy", "encode")) for i in test_ids}
    items = abx_items(rows, contexts, frame_rate)
    if items:
        for mode in ("within", "across"):
            err = abx_error(items, mode, cfg.eval.frame_metric,
                            max_items_per_group=cfg.eval.abx_max_items_per_group, seed=cfg.seed)
            reports.append(MetricReport(f"abx_{mode}", err, "%", len(items),
                                        {"frame_metric": cfg.eval.frame_metric,
                                         "max_items_per_group": cfg.eval.abx_max_items_per_group}))
    run = Run(out_dir, "eval", "eval-units", cfg)
    run.write_csv("units.csv", CSV_HEADER, _report_rows(reports))
    return run.finish()


def _normalized_mel(samples, cfg, stats):
    return minmax_normalize(log_mel(Waveform(samples, cfg.features.sample_rate), cfg.features), stats)


def eval_audio(cfg: RunConfig, out_dir):
    pdir, rows, stats = _load_prep(out_dir)
    sdir = Path(out_dir) / "synth"
    _need(sdir / "run-synth.json", "synth")
    pairs = []
    for r in rows:
        wav = sdir / f"{r['id']}.wav"
        if wav.exists():
            hyp = load_wav(wav).samples
            # the reference keeps trailing audio past the last unit; score the covered span
            ref = _load_audio(pdir, r)[: len(hyp)]
            pairs.append((_normalized_mel(ref, cfg, stats), _normalized_mel(hyp, cfg, stats)))
    if not pairs:
        raise DataError(f"no synthesized audio in {sdir}")
    mse, ps, ss = [], [], []
    for ref, hyp in pairs:
        e = ls_mse(ref, hyp)
        mse.append(e)
        ps.append(psnr(ref, hyp))
        ss.append(ssim(ref, hyp))
        # PSNR and LS-MSE are tied by PSNR = -10 log10(MSE) at peak 1
        if e > 0 and not np.isclose(ps[-1], -10 * np.log10(e)):
            raise FloatingPointError("PSNR / LS-MSE consistency check failed")
    conf = {"ssim_window": 7, "ssim_sigma": 1.5}
    reports = [MetricReport("ls_mse", float(np.mean(mse)), "", len(pairs), conf),
               MetricReport("psnr", float(np.mean(ps)), "dB", len(pairs), conf),
               MetricReport("ssim", float(np.mean(ss)), "", len(pairs), conf)]
    run = Run(out_dir, "eval", "eval-audio", cfg)
    run.write_csv("audio.csv", CSV_HEADER, _report_rows(reports))
    return run.finish()


def _read_pairs(path):
    pairs = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                if "ref" not in rec or "hyp" not in rec:
                    raise DataError(f"{path}:{lineno}: records need 'ref' and 'hyp'")
                pairs.append(rec)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not pairs:
        raise DataError(f"{path}: no transcript pairs")
    return pairs


def eval_text(cfg: RunConfig, out_dir, input_path=None):
    """CER/WER (and PER when phone lists are given) over transcript pairs.

    Without ``input_path`` the synthesized test audio of the synthetic corpus
    is transcribed with the toy tone recognizer.
    """
    run = Run(out_dir, "eval", "eval-text", cfg)
    asr = None
    if input_path is None:
        pdir, rows, _ = _load_prep(out_dir)
        sdir = Path(out_dir) / "synth"
        _need(sdir / "run-synth.json", "synth")
        n_spk = len({r["speaker"] for r in rows})
        pairs = []
        for r in rows:
            wav = sdir / f"{r['id']}.wav"
            if not wav.exists() or "transcript" not in r:
                continue
            hyp = toydata.recognize_tones(load_wav(wav).samples, r["speaker_index"], n_spk,
                                          2 * cfg.features.hop, cfg.features.sample_rate)
            pairs.append({"id": r["id"], "ref": r["transcript"], "hyp": hyp,
                          "ref_phonemes": list(r["transcript"]), "hyp_phonemes": list(hyp)})
        if not pairs:
            raise DataError("no synthesized utterances with transcripts")
        asr = "".join(json.dumps(p, sort_keys=True) + "\n" for p in pairs)
    else:
        pairs = _read_pairs(input_path)
    try:
        char = corpus_error_rate([(p["ref"], p["hyp"]) for p in pairs], "char", verbose=True)
        word = corpus_error_rate([(p["ref"], p["hyp"]) for p in pairs], "word", verbose=True)
        phon = None
        if all("ref_phonemes" in p and "hyp_phonemes" in p for p in pairs):
            phon = corpus_error_rate([(p["ref_phonemes"], p["hyp_phonemes"]) for p in pairs],
                                     "phoneme", verbose=True)
    except ValueError as exc:
        raise DataError(f"transcript pairs: {exc}") from exc
    n = len(pairs)
    reports = [MetricReport("cer", char[0], "%", n, {"pooling": "corpus"}),
               MetricReport("cer_utt_avg", char[1], "%", n, {"pooling": "utterance"}),
               MetricReport("wer", word[0], "%", n, {"pooling": "corpus"}),
               MetricReport("wer_utt_avg", word[1], "%", n, {"pooling": "utterance"})]
    if phon is not None:
        reports += [MetricReport("per", phon[0], "%", n, {"pooling": "corpus"}),
                    MetricReport("per_utt_avg", phon[1], "%", n, {"pooling": "utterance"})]
    if asr is not None:
        run.write_text("asr.jsonl", asr)
    run.write_csv("text.csv", CSV_HEADER, _report_rows(reports))
    return run.finish()


def sched_preview(cfg: RunConfig, out_dir):
    run = Run(out_dir, "sched", "sched-preview", cfg)
    s = cfg.scheduler
    stride = max(1, s.total_steps // 2000)
    curve = lr_curve(s, stride)
    steps, lrs = curve[:, 0].astype(int).tolist(), curve[:, 1]
    run.write_csv("schedule.csv", ["step", "lr"], [[k, repr(float(v))] for k, v in zip(steps, lrs)])
    run.write_text("schedule.svg", line_chart({s.kind: (steps, lrs.tolist())},
                                              title=f"{s.kind} schedule", xlabel="step",
                                              ylabel="learning rate"))
    run.extra["max_lr"] = float(lrs.max())
    return run.finish()
