"""Versioned binary checkpoint container.

Layout: 4-byte magic, u32 version, u64 header length, UTF-8 JSON header
(named-tensor table + free-form metadata), then little-endian float32
payloads. Optimizer moments are stored next to their parameters and the
metadata carries the RNG seed, so training resumes bit-reproducibly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import TubervolError
from .optim import ParameterSet

MAGIC = b"TVCK"
VERSION = 1


class CheckpointError(TubervolError):
    pass


def save_checkpoint(path, params: ParameterSet, meta: dict | None = None) -> None:
    tensors = []
    payloads = []
    offset = 0

    def push(name, array):
        nonlocal offset
        data = np.ascontiguousarray(array, dtype="<f4")
        tensors.append({"name": name, "shape": list(array.shape), "offset": offset,
                        "nbytes": data.nbytes})
        payloads.append(data.tobytes())
        offset += data.nbytes

    steps = {}
    for name, state in params:
        push(name, state.tensor.values)
        push(name + ".adam_m", state.m)
        push(name + ".adam_v", state.v)
        steps[name] = state.step

    header = json.dumps({"tensors": tensors, "steps": steps, "meta": meta or {}}).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def load_checkpoint(path, dtype=np.float32) -> tuple[ParameterSet, dict]:
    with Path(path).open("rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        version, header_len = struct.unpack("<IQ", fh.read(12))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        body = fh.read()

    arrays = {}
    for entry in header["tensors"]:
        raw = body[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).astype(dtype)

    params = ParameterSet()
    for entry in header["tensors"]:
        name = entry["name"]
        if name.endswith(".adam_m") or name.endswith(".adam_v"):
            continue
        params.add(name, arrays[name])
        state = params.state(name)
        state.m = arrays[name + ".adam_m"]
        state.v = arrays[name + ".adam_v"]
        state.step = int(header["steps"].get(name, 0))
    return params, header["meta"]
