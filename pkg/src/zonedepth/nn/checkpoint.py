"""Single-file checkpoints.

Layout: ``b"DLTR"``, u32 version, u32 header byte length, UTF-8 JSON header
(``config`` plus ``params``: ordered ``[name, shape]`` pairs, and free-form
``extra``), then every parameter as contiguous little-endian float32 in header
order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..io import atomic_write_bytes
from .model import FusionConfig, ZoneFusionNet

MAGIC = b"DLTR"
VERSION = 1


def save_checkpoint(path, model: ZoneFusionNet, extra: dict | None = None) -> None:
    state = model.state_dict()
    header = {
        "config": model.cfg.to_dict(),
        "params": [[name, list(t.shape)] for name, t in state.items()],
        "extra": extra or {},
    }
    header_bytes = json.dumps(header).encode("utf-8")
    blobs = [t.detach().cpu().numpy().astype("<f4").tobytes() for t in state.values()]
    atomic_write_bytes(path, MAGIC + struct.pack("<II", VERSION, len(header_bytes)) + header_bytes + b"".join(blobs))


def load_checkpoint(path) -> tuple[ZoneFusionNet, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    model = ZoneFusionNet(FusionConfig.from_dict(header["config"]))
    offset = 12 + header_len
    state = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        state[name] = torch.from_numpy(arr.copy())
        offset += 4 * count
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after parameter data")
    model.load_state_dict(state)
    return model, header.get("extra", {})
