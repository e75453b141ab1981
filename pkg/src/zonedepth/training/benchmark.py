"""Seeded synthetic benchmark: train variants on identical data and compare validation RMSE."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..evaluation import MetricReport, baseline_nearest_zone, compute_metrics, mean_report
from .data import TensorDataset, generate_samples
from .scenes import SceneSpec
from .train import TrainConfig, evaluate_model, make_ablation_config, train


@dataclass
class BenchmarkResult:
    baseline: MetricReport
    variants: dict = field(default_factory=dict)  # name -> MetricReport
    seconds: dict = field(default_factory=dict)

    def rmse(self) -> dict:
        out = {"baseline-nearest-zone": self.baseline.rmse}
        out.update({k: v.rmse for k, v in self.variants.items()})
        return out


def make_splits(cfg: TrainConfig, template: SceneSpec = SceneSpec()):
    train_samples = generate_samples(cfg.train_scenes, cfg.data_seed, template)
    val_samples = generate_samples(cfg.val_scenes, cfg.data_seed + cfg.train_scenes, template)
    return TensorDataset(train_samples), TensorDataset(val_samples)


def evaluate_baseline(data: TensorDataset) -> MetricReport:
    reports = []
    for s in data.samples:
        rects, _ = s.footprints()
        pred = baseline_nearest_zone(s.zones, rects, (s.depth.height, s.depth.width))
        reports.append(compute_metrics(pred, s.depth))
    return mean_report(reports)


def run_benchmark(cfg: TrainConfig, variants=("full", "no-patch-dist-corr"), log=print,
                  splits=None) -> BenchmarkResult:
    train_data, val_data = splits if splits is not None else make_splits(cfg)
    result = BenchmarkResult(evaluate_baseline(val_data))
    log(f"baseline-nearest-zone: val rmse {result.baseline.rmse:.4f}")
    for name in variants:
        vcfg = replace(make_ablation_config(name, cfg), eval_every=0)
        t0 = time.perf_counter()
        run = train(vcfg, train_data)
        result.variants[name] = evaluate_model(run.model, val_data)
        result.seconds[name] = time.perf_counter() - t0
        tail = float(np.mean(run.losses[-50:]))
        log(f"{name}: val rmse {result.variants[name].rmse:.4f}, final train loss {tail:.4f}, "
            f"{result.seconds[name]:.0f} s")
    return result
