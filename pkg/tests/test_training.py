import json
from dataclasses import replace

import numpy as np
import pytest
import torch

from zonedepth.errors import TrainingDivergedError
from zonedepth.nn.checkpoint import load_checkpoint
from zonedepth.nn.model import FusionConfig, ZoneFusionNet
from zonedepth.training.data import TensorDataset, generate_samples
from zonedepth.training.train import ABLATIONS, TrainConfig, make_ablation_config, train

SMALL = TrainConfig(batch_size=2, steps=6, lr=1e-3, eval_every=3,
                    fusion=FusionConfig(dims=(8, 8, 8), n_bins=8, n_samples=4))


@pytest.fixture(scope="module")
def tiny_data():
    return TensorDataset(generate_samples(3, 100))


def test_zero_lr_keeps_parameters_and_loss(tiny_data):
    single = TensorDataset(tiny_data.samples[:1])
    torch.manual_seed(SMALL.seed)
    before = {k: v.clone() for k, v in ZoneFusionNet(SMALL.fusion).state_dict().items()}
    run = train(replace(SMALL, lr=0.0), single)
    after = run.model.state_dict()
    assert all(torch.equal(before[k], after[k]) for k in before)
    assert len(set(run.losses)) == 1


def test_equal_seeds_equal_curves(tiny_data):
    a = train(SMALL, tiny_data)
    b = train(SMALL, tiny_data)
    assert a.losses == b.losses
    assert a.history == b.history
    c = train(replace(SMALL, seed=1), tiny_data)
    assert c.losses != a.losses


def test_log_and_checkpoint(tiny_data, tmp_path):
    run = train(SMALL, tiny_data, log_path=tmp_path / "log.jsonl", checkpoint_path=tmp_path / "m.dltr")
    records = [json.loads(line) for line in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert [r["step"] for r in records] == [3, 6]
    assert set(records[0]) == {"step", "loss", "rmse", "rel", "d1"}
    model, extra = load_checkpoint(tmp_path / "m.dltr")
    assert extra["train_config"] == SMALL.to_dict()
    inp, _, _ = tiny_data.batch([0])
    with torch.no_grad():
        torch.testing.assert_close(model(inp), run.model(inp))


def test_nan_loss_aborts_with_diagnostics(tiny_data):
    model = ZoneFusionNet(SMALL.fusion)
    with torch.no_grad():
        model.head.coef_conv.bias.fill_(float("nan"))
    with pytest.raises(TrainingDivergedError) as info:
        train(SMALL, tiny_data, model=model)
    assert info.value.step == 1
    assert "head.coef_conv.bias" in info.value.parameter_norms


def test_loss_decreases_on_one_scene(tiny_data):
    run = train(replace(SMALL, steps=60, batch_size=1, lr=2e-3, eval_every=0), TensorDataset(tiny_data.samples[:1]))
    assert np.mean(run.losses[-5:]) < 0.7 * run.losses[0]


def test_ablation_configs():
    base = TrainConfig()
    assert make_ablation_config("full", base) == base
    no_refine = make_ablation_config("no-refine", base)
    assert no_refine.fusion == replace(base.fusion, refine=False)
    assert replace(no_refine, fusion=base.fusion) == base
    assert make_ablation_config("feature-concat", base).fusion.fusion_mode == "concat"
    assert make_ablation_config("mean-var-pointnet", base).fusion.dist_encoding == "mean-var"
    assert make_ablation_config("five-channel", base).fusion.dist_encoding == "five-channel"
    assert not make_ablation_config("no-patch-dist-corr", base).fusion.patch_dist_corr
    assert set(ABLATIONS) == {"full", "mean-var-pointnet", "five-channel", "feature-concat", "no-patch-dist-corr",
                              "no-img-self-attn", "no-img-dist-attn", "uniform-sampling", "no-refine"}
    with pytest.raises(ValueError):
        make_ablation_config("no-such-thing", base)


def test_uniform_sampling_switches_sampler(tiny_data):
    inp, _, _ = tiny_data.batch([0])
    cfg = make_ablation_config("uniform-sampling", SMALL).fusion
    assert not cfg.prob_sampling
    a = ZoneFusionNet(SMALL.fusion).zone_samples(inp)
    b = ZoneFusionNet(cfg).zone_samples(inp)
    k = int(torch.nonzero(inp.variances[0] > 1e-3)[0])
    assert not torch.allclose(a[0, k], b[0, k])
    sigma = inp.variances[0, k].sqrt()
    expected = inp.means[0, k] + sigma * torch.tensor([-1.5, -0.5, 0.5, 1.5])
    torch.testing.assert_close(b[0, k], expected.clamp(cfg.d_min, cfg.d_max))


def test_train_config_round_trip_and_validation():
    assert TrainConfig.from_dict(json.loads(json.dumps(SMALL.to_dict()))) == SMALL
    with pytest.raises(ValueError):
        TrainConfig(steps=0)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"epochs": 3})
