"""Command-line entry point: ``textless <command> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from threadpoolctl import threadpool_limits

from textless import pipeline
from textless.audio import TooShortError, WavFormatError
from textless.checkpoint import CheckpointError
from textless.config import ConfigError, PRESETS, parse_config
from textless.models.train import TrainingDiverged
from textless.nn.optim import NonFiniteGradient
from textless.schedules import NoUsableRange
from textless.upsample import KINDS

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("textless")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--preset", help=f"preset name ({', '.join(sorted(PRESETS))})")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", default="runs/default")
    common.add_argument("--threads", type=int, default=1,
                        help="BLAS/OpenMP threads (1 gives bit-reproducible runs)")
    common.add_argument("--precision", choices=("f32", "f64"), default="f32")
    common.add_argument("--upsampler", choices=KINDS,
                        help="override both vocoder interpolation stages")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (JSON literal or bare string)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="textless", description="desk-scale textless speech lab")
    sub = p.add_subparsers(dest="command", required=True)
    for name in pipeline.COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("train-encoder", "train-vocoder"):
            sp.add_argument("--resume", action="store_true",
                            help="continue from the checkpoint in the output directory")
        if name == "lrrt":
            sp.add_argument("--model", choices=("vocoder", "encoder"), default="vocoder")
        if name == "synth":
            sp.add_argument("--split", default="test")
            sp.add_argument("--target-speaker", type=int,
                            help="speaker index to render every utterance with")
        if name == "eval-text":
            sp.add_argument("--input", help="JSON Lines of {ref, hyp[, ref_phonemes, hyp_phonemes]}")
    return p


def _overrides(args):
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    if args.seed is not None:
        out["seed"] = args.seed
    if args.upsampler is not None:
        out["vocoder.upsample1"] = args.upsampler
        out["vocoder.upsample2"] = args.upsampler
    return out


def _dispatch(args, cfg):
    out, prec = args.out_dir, args.precision
    c = args.command
    if c == "prep":
        return pipeline.prep(cfg, out)
    if c == "lrrt":
        return pipeline.lrrt(cfg, out, prec, args.model)
    if c == "train-encoder":
        return pipeline.train_encoder(cfg, out, prec, args.resume)
    if c == "train-vocoder":
        return pipeline.train_vocoder(cfg, out, prec, args.resume)
    if c == "encode":
        return pipeline.encode(cfg, out, prec)
    if c == "synth":
        return pipeline.synth(cfg, out, prec, args.split, args.target_speaker)
    if c == "eval-units":
        return pipeline.eval_units(cfg, out)
    if c == "eval-audio":
        return pipeline.eval_audio(cfg, out)
    if c == "eval-text":
        return pipeline.eval_text(cfg, out, args.input)
    if c == "sched-preview":
        return pipeline.sched_preview(cfg, out)
    raise ConfigError(f"unknown command {c}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = parse_config(args.config, args.preset, _overrides(args))
        with threadpool_limits(limits=args.threads):
            manifest = _dispatch(args, cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (pipeline.DataError, WavFormatError, TooShortError, CheckpointError,
            FileNotFoundError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (TrainingDiverged, NonFiniteGradient, NoUsableRange, FloatingPointError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    print(json.dumps(manifest, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
