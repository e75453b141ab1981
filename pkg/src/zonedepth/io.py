"""On-disk formats: DMAP depth rasters, binary PPM images, JSON records."""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, Extrinsics, Plane

DMAP_MAGIC = b"DMAP"


def write_dmap(path, depth: DepthMap) -> None:
    data = depth.filled(np.nan).astype("<f4")
    header = DMAP_MAGIC + struct.pack("<II", depth.width, depth.height)
    atomic_write_bytes(path, header + data.tobytes(order="C"))


def read_dmap(path) -> DepthMap:
    raw = Path(path).read_bytes()
    if raw[:4] != DMAP_MAGIC:
        raise ValueError(f"{path}: not a DMAP file")
    width, height = struct.unpack("<II", raw[4:12])
    expected = 12 + 4 * width * height
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", offset=12).reshape(height, width).astype(float)
    return DepthMap(values)


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) image with values in [0, 1] as binary P6."""
    img = np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = img.shape
    atomic_write_bytes(path, f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval separated by whitespace (comments allowed)
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while raw[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P6":
        raise ValueError(f"{path}: only binary P6 is supported")
    w, h, maxval = (int(t) for t in tokens[1:])
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=pos + 1, count=w * h * 3)
    return pixels.reshape(h, w, 3).astype(float) / maxval


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode("utf-8"))


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def read_intrinsics(path) -> CameraIntrinsics:
    return CameraIntrinsics.from_dict(read_json(path))


def read_extrinsics(path) -> Extrinsics:
    return Extrinsics.from_dict(read_json(path))


def read_plane(path) -> Plane:
    return Plane.from_dict(read_json(path))
