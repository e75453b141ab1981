from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import torch

from ..errors import TrainingDivergedError
from ..evaluation import MetricReport, compute_metrics, mean_report
from ..geometry import DepthMap
from ..nn.checkpoint import save_checkpoint
from ..nn.model import FusionConfig, ZoneFusionNet
from .data import TensorDataset
from .loss import LossConfig, si_loss

ABLATIONS = {
    "full": {},
    "mean-var-pointnet": {"dist_encoding": "mean-var"},
    "five-channel": {"dist_encoding": "five-channel"},
    "feature-concat": {"fusion_mode": "concat"},
    "no-patch-dist-corr": {"patch_dist_corr": False},
    "no-img-self-attn": {"img_self_attn": False},
    "no-img-dist-attn": {"img_dist_attn": False},
    "uniform-sampling": {"prob_sampling": False},
    "no-refine": {"refine": False},
}


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    steps: int = 5000
    lr: float = 3e-4
    seed: int = 0
    fusion: FusionConfig = field(default_factory=FusionConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train_scenes: int = 400
    val_scenes: int = 50
    data_seed: int = 0  # scene seeds: train from data_seed, val after the train block
    eval_every: int = 500  # 0 evaluates only after the last step
    grad_clip: float | None = 1.0

    def __post_init__(self):
        for name in ("batch_size", "steps", "train_scenes", "val_scenes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.eval_every < 0:
            raise ValueError("eval_every must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fusion"] = self.fusion.to_dict()
        d["loss"] = asdict(self.loss)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        d = dict(d)
        if "fusion" in d:
            d["fusion"] = FusionConfig.from_dict(d["fusion"])
        if "loss" in d:
            d["loss"] = LossConfig(**d["loss"])
        return cls(**d)


def make_ablation_config(name: str, base: TrainConfig) -> TrainConfig:
    """``base`` with the fusion toggles of the named variant applied."""
    if name not in ABLATIONS:
        raise ValueError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
    if not ABLATIONS[name]:
        return base
    return replace(base, fusion=replace(base.fusion, **ABLATIONS[name]))


@dataclass
class TrainResult:
    model: ZoneFusionNet
    losses: list  # training loss per step
    history: list  # one record per evaluation
    seconds: float = 0.0


def parameter_norms(model: torch.nn.Module) -> dict:
    return {name: float(p.detach().norm()) for name, p in model.named_parameters()}


@torch.no_grad()
def predict_dataset(model: ZoneFusionNet, data: TensorDataset, batch_size: int = 16) -> np.ndarray:
    was_training = model.training
    model.eval()
    out = []
    for start in range(0, len(data), batch_size):
        inp, _, _ = data.batch(range(start, min(start + batch_size, len(data))))
        out.append(model(inp).cpu().numpy())
    model.train(was_training)
    return np.concatenate(out)


def evaluate_model(model: ZoneFusionNet, data: TensorDataset, batch_size: int = 16) -> MetricReport:
    """Per-image metrics averaged over the dataset."""
    preds = predict_dataset(model, data, batch_size)
    return mean_report([compute_metrics(DepthMap(p.astype(float)), s.depth) for p, s in zip(preds, data.samples)])


def train(cfg: TrainConfig, train_data: TensorDataset, val_data: TensorDataset | None = None,
          log_path=None, checkpoint_path=None, model: ZoneFusionNet | None = None) -> TrainResult:
    """Adam with cosine learning-rate decay on the scale-invariant loss.

    Batches are drawn from seeded epoch permutations, so equal configs give
    identical runs. Evaluation records ``{step, loss, rmse, rel, d1}`` go to
    ``log_path`` as JSON lines; ``val_data`` defaults to the training data.
    """
    if len(train_data) == 0:
        raise ValueError("training dataset is empty")
    val_data = val_data if val_data is not None else train_data
    torch.manual_seed(cfg.seed)
    if model is None:
        model = ZoneFusionNet(cfg.fusion)
    model = model.to(train_data.dtype)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: 0.5 * (1 + math.cos(math.pi * min(s, cfg.steps) / cfg.steps)))
    rng = np.random.default_rng(cfg.seed)
    bs = min(cfg.batch_size, len(train_data))
    order = np.empty(0, dtype=int)

    log = open(log_path, "w", encoding="utf-8") if log_path else None
    losses, history = [], []
    t0 = time.perf_counter()
    try:
        for step in range(1, cfg.steps + 1):
            if len(order) < bs:
                order = np.concatenate([order, rng.permutation(len(train_data))])
            idx, order = order[:bs], order[bs:]
            inp, gt, valid = train_data.batch(idx)
            pred = model(inp)
            loss = si_loss(pred, gt, cfg.loss, valid)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss {loss.item()} at step {step}", step,
                                            parameter_norms(model))
            opt.zero_grad(set_to_none=True)
            loss.backward()
            if cfg.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            sched.step()
            losses.append(loss.item())

            if (cfg.eval_every and step % cfg.eval_every == 0) or step == cfg.steps:
                report = evaluate_model(model, val_data)
                record = {"step": step, "loss": losses[-1], "rmse": report.rmse, "rel": report.rel,
                          "d1": report.delta1}
                history.append(record)
                if log:
                    log.write(json.dumps(record) + "\n")
                    log.flush()
    finally:
        if log:
            log.close()

    if checkpoint_path:
        save_checkpoint(checkpoint_path, model, {"train_config": cfg.to_dict(), "history": history})
    return TrainResult(model, losses, history, time.perf_counter() - t0)


def read_train_config(path) -> TrainConfig:
    with open(Path(path), encoding="utf-8") as f:
        return TrainConfig.from_dict(json.load(f))
