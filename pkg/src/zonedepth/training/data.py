"""Scene folders on disk and their batched tensor form.

A scene folder holds ``rgb.ppm``, ``depth_rgb.dmap``, ``zones.json`` and
``meta.json`` (camera intrinsics, RGB-to-ToF extrinsics, sensor settings).
Real captures written in the same layout load the same way.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from ..geometry import CameraIntrinsics, DepthMap, Extrinsics
from ..io import read_dmap, read_json, read_ppm, write_dmap, write_json, write_ppm
from ..nn.model import ModelInput
from ..sensor import ZoneGrid, zone_footprints
from .scenes import Scene, SceneSpec, generate_scene


@dataclass
class Sample:
    rgb: np.ndarray  # (H, W, 3)
    depth: DepthMap  # ground truth in the RGB frame
    zones: ZoneGrid
    K_rgb: CameraIntrinsics
    K_tof: CameraIntrinsics
    extrinsics: Extrinsics
    name: str = ""

    @classmethod
    def from_scene(cls, scene: Scene, name: str = "") -> "Sample":
        spec = scene.spec
        return cls(scene.rgb, scene.depth_rgb, scene.zones, spec.K_rgb, spec.sensor.tof_intrinsics(),
                   spec.extrinsics, name)

    def footprints(self) -> tuple[np.ndarray, np.ndarray]:
        return zone_footprints(self.zones, self.K_tof, self.K_rgb, self.extrinsics)


def save_scene(folder, scene: Scene) -> Path:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    spec = scene.spec
    write_ppm(folder / "rgb.ppm", scene.rgb)
    write_dmap(folder / "depth_rgb.dmap", scene.depth_rgb)
    write_json(folder / "zones.json", scene.zones.to_dict())
    write_json(folder / "meta.json", {
        "seed": spec.seed,
        "K_rgb": spec.K_rgb.to_dict(),
        "K_tof": spec.sensor.tof_intrinsics().to_dict(),
        "extrinsics": spec.extrinsics.to_dict(),
        "sensor": spec.sensor.to_dict(),
    })
    return folder


def load_sample(folder) -> Sample:
    folder = Path(folder)
    meta = read_json(folder / "meta.json")
    return Sample(
        rgb=read_ppm(folder / "rgb.ppm"),
        depth=read_dmap(folder / "depth_rgb.dmap"),
        zones=ZoneGrid.from_dict(read_json(folder / "zones.json")),
        K_rgb=CameraIntrinsics.from_dict(meta["K_rgb"]),
        K_tof=CameraIntrinsics.from_dict(meta["K_tof"]),
        extrinsics=Extrinsics.from_dict(meta["extrinsics"]),
        name=folder.name,
    )


def generate_scenes(count: int, seed: int, template: SceneSpec = SceneSpec(), workers: int = 1) -> list[Scene]:
    """``count`` random scenes with seeds ``seed, seed+1, ...``; order is independent of ``workers``."""
    if count < 1:
        raise ValueError("count must be positive")
    specs = [replace(template, seed=seed + i) for i in range(count)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(generate_scene, specs))
    return [generate_scene(s) for s in specs]


def generate_samples(count: int, seed: int, template: SceneSpec = SceneSpec(), workers: int = 1) -> list[Sample]:
    return [Sample.from_scene(sc, f"scene_{sc.spec.seed:06d}") for sc in generate_scenes(count, seed, template, workers)]


def write_dataset(root, count: int, seed: int, template: SceneSpec = SceneSpec(), workers: int = 1) -> list[Path]:
    root = Path(root)
    return [save_scene(root / f"scene_{sc.spec.seed:06d}", sc) for sc in generate_scenes(count, seed, template, workers)]


def load_dataset(root) -> list[Sample]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset folder not found: {root}")
    folders = sorted(p for p in root.iterdir() if (p / "meta.json").exists())
    if not folders:
        raise ValueError(f"no scene folders under {root}")
    return [load_sample(p) for p in folders]


class TensorDataset:
    """All samples stacked into tensors so batches are plain index lookups."""

    def __init__(self, samples: list[Sample], dtype=torch.float32):
        if not samples:
            raise ValueError("dataset is empty")
        shapes = {s.rgb.shape for s in samples}
        if len(shapes) != 1:
            raise ValueError(f"mixed image sizes in dataset: {sorted(shapes)}")
        self.samples = samples
        self.dtype = dtype
        self.rgb = torch.as_tensor(np.stack([s.rgb.transpose(2, 0, 1) for s in samples]), dtype=dtype)
        self.depth = torch.as_tensor(np.stack([s.depth.filled(1.0) for s in samples]), dtype=dtype)
        self.depth_valid = torch.as_tensor(np.stack([s.depth.valid for s in samples]))
        self.means = torch.as_tensor(np.stack([np.nan_to_num(s.zones.means.ravel(), nan=0.0) for s in samples]),
                                     dtype=dtype)
        self.variances = torch.as_tensor(
            np.stack([np.nan_to_num(s.zones.variances.ravel(), nan=0.0) for s in samples]), dtype=dtype)
        rects, ok = zip(*(s.footprints() for s in samples))
        self.rects = torch.as_tensor(np.nan_to_num(np.stack(rects), nan=0.0), dtype=dtype)
        self.zone_valid = torch.as_tensor(np.stack(ok))

    def __len__(self) -> int:
        return len(self.samples)

    def batch(self, indices) -> tuple[ModelInput, torch.Tensor, torch.Tensor]:
        idx = torch.as_tensor(indices, dtype=torch.long)
        inp = ModelInput(self.rgb[idx], self.means[idx], self.variances[idx], self.zone_valid[idx], self.rects[idx])
        return inp, self.depth[idx], self.depth_valid[idx]
