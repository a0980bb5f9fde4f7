"""ZVCK checkpoint container.

Layout: b"ZVCK", u32 format version, u64 header length, UTF-8 JSON header,
then the tensor payload. The header holds a tensor directory (name, shape,
dtype, byte offset, byte length), the training step, a config snapshot and
the RNG state. Tensors are stored as little-endian f32 (or f64 when the run
used double precision), packed in directory order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from textless.audio import atomic_write_bytes

MAGIC = b"ZVCK"
VERSION = 1
_DTYPES = {"f32": "<f4", "f64": "<f8"}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    tensors: dict  # name -> ndarray
    step: int = 0
    config: dict = field(default_factory=dict)
    rng_state: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _dtype_tag(a):
    return "f64" if a.dtype == np.float64 else "f32"


def to_bytes(ckpt: Checkpoint) -> bytes:
    directory, blobs, offset = [], [], 0
    for name in sorted(ckpt.tensors):
        arr = np.asarray(ckpt.tensors[name])
        tag = _dtype_tag(arr)
        blob = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "dtype": tag,
                          "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = {"tensors": directory, "step": int(ckpt.step), "config": ckpt.config,
              "rng_state": ckpt.rng_state, "meta": ckpt.meta}
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<IQ", VERSION, len(hbytes)) + hbytes + b"".join(blobs)


def from_bytes(blob: bytes) -> Checkpoint:
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CheckpointError("bad magic: not a ZVCK checkpoint")
    version, hlen = struct.unpack("<IQ", blob[4:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if len(blob) < 16 + hlen:
        raise CheckpointError("truncated header")
    header = json.loads(blob[16 : 16 + hlen])
    payload = memoryview(blob)[16 + hlen :]
    tensors = {}
    end = 0
    for entry in header["tensors"]:
        off, n = entry["offset"], entry["nbytes"]
        if off < end:
            raise CheckpointError(f"overlapping tensor {entry['name']}")
        if off + n > len(payload):
            raise CheckpointError(f"truncated payload at tensor {entry['name']}")
        arr = np.frombuffer(payload[off : off + n], dtype=_DTYPES[entry["dtype"]])
        tensors[entry["name"]] = arr.reshape(entry["shape"]).astype(
            np.float64 if entry["dtype"] == "f64" else np.float32)
        end = off + n
    return Checkpoint(tensors, header["step"], header["config"], header["rng_state"],
                      header.get("meta", {}))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    atomic_write_bytes(path, to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


# ---------------------------------------------------------------- model/state glue


def _rng_state_json(rng):
    state = rng.bit_generator.state
    return json.loads(json.dumps(state))


def state_to_checkpoint(state, config: dict, kind: str) -> Checkpoint:
    """Snapshot a TrainState (model, Adam moments, step, RNG) as a Checkpoint."""
    named = state.model.named_params()
    tensors = {f"model.{k}": p.data for k, p in named.items()}
    tensors.update(state.optimizer.state_tensors(list(named)))
    meta = {"kind": kind, "adam_t": state.optimizer.t}
    vq = getattr(state.model, "vq", None)
    if vq is not None:
        tensors["vq.usage"] = vq.usage.astype(np.float64)
        tensors["vq.idle"] = vq.idle.astype(np.float64)
    return Checkpoint(tensors, state.step, config, _rng_state_json(state.rng), meta)


def load_into_model(model, ckpt: Checkpoint) -> None:
    named = model.named_params()
    for name, p in named.items():
        key = f"model.{name}"
        if key not in ckpt.tensors:
            raise CheckpointError(f"checkpoint lacks tensor {key}")
        arr = ckpt.tensors[key]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for tensor {key}: checkpoint {tuple(arr.shape)} vs model "
                f"{tuple(p.data.shape)}"
            )
        p.data[...] = arr
    vq = getattr(model, "vq", None)
    if vq is not None and "vq.usage" in ckpt.tensors:
        vq.usage[...] = ckpt.tensors["vq.usage"].astype(np.int64)
        vq.idle[...] = ckpt.tensors["vq.idle"].astype(np.int64)


def restore_state(state, ckpt: Checkpoint) -> None:
    """Load model weights, optimizer moments, step and RNG into ``state``."""
    load_into_model(state.model, ckpt)
    names = list(state.model.named_params())
    state.optimizer.load_state_tensors(names, ckpt.tensors, ckpt.meta.get("adam_t", ckpt.step))
    state.step = int(ckpt.step)
    if ckpt.rng_state:
        state.rng.bit_generator.state = ckpt.rng_state
