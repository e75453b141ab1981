import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from zonedepth.errors import NoValidPixelsError
from zonedepth.geometry import DepthMap
from zonedepth.training.loss import LossConfig, si_loss


def test_perfect_prediction_is_exactly_zero():
    gt = torch.rand(2, 6, 5, dtype=torch.float64) + 0.5
    assert si_loss(gt.clone(), gt).item() == 0.0


def test_single_pixel_oracle():
    gt = DepthMap(np.array([[1.5, np.nan]]))
    pred = DepthMap(np.array([[3.0, 7.0]]))
    expected = 10 * math.log(2) * math.sqrt(1 - 0.85)
    assert si_loss(pred, gt).item() == pytest.approx(expected, abs=1e-12)
    assert abs(si_loss(pred, gt).item() - 2.6846) < 1e-4


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.05, 20), seed=st.integers(0, 10_000))
def test_global_scale_invariance_at_lambda_one(s, seed):
    g = torch.Generator().manual_seed(seed)
    gt = torch.rand(8, 9, generator=g, dtype=torch.float64) + 0.2
    pred = torch.rand(8, 9, generator=g, dtype=torch.float64) + 0.2
    cfg = LossConfig(lam=1.0)
    assert abs(si_loss(pred * s, gt, cfg).item() - si_loss(pred, gt, cfg).item()) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0, 1))
def test_non_negative_and_permutation_invariant(seed, lam):
    g = torch.Generator().manual_seed(seed)
    gt = torch.rand(30, generator=g, dtype=torch.float64) + 0.1
    pred = torch.rand(30, generator=g, dtype=torch.float64) + 0.1
    cfg = LossConfig(lam=lam)
    a = si_loss(pred.view(5, 6), gt.view(5, 6), cfg).item()
    perm = torch.randperm(30, generator=g)
    b = si_loss(pred[perm].view(5, 6), gt[perm].view(5, 6), cfg).item()
    assert a >= 0
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_gradient_matches_finite_differences():
    torch.manual_seed(0)
    gt = torch.rand(4, 5, dtype=torch.float64) + 0.5
    pred = (torch.rand(4, 5, dtype=torch.float64) + 0.5).requires_grad_()
    assert torch.autograd.gradcheck(lambda p: si_loss(p, gt), (pred,), eps=1e-6, atol=1e-8, rtol=1e-4)


def test_gradient_is_zero_at_perfect_prediction():
    gt = torch.rand(3, 3, dtype=torch.float64) + 0.5
    pred = gt.clone().requires_grad_()
    si_loss(pred, gt).backward()
    assert torch.equal(pred.grad, torch.zeros_like(gt))


def test_valid_mask_and_batch_mean():
    gt = torch.ones(2, 2, 2, dtype=torch.float64)
    pred = gt.clone()
    pred[0, 0, 0] = 2.0
    valid = torch.ones_like(gt, dtype=torch.bool)
    valid[0, 0, 0] = False
    assert si_loss(pred, gt, valid=valid).item() == 0.0
    single = si_loss(pred[0], gt[0]).item()
    assert si_loss(pred, gt).item() == pytest.approx(single / 2)


def test_errors():
    gt = torch.full((2, 2), float("nan"))
    with pytest.raises(NoValidPixelsError):
        si_loss(torch.ones(2, 2), gt)
    with pytest.raises(ValueError):
        si_loss(torch.ones(2, 3), torch.ones(2, 2))
    with pytest.raises(ValueError):
        LossConfig(lam=1.5)
    with pytest.raises(ValueError):
        LossConfig(alpha=0)


def test_nan_prediction_propagates():
    import torch
    from zonedepth.training.loss import si_loss
    pred = torch.ones(1, 4, 4, dtype=torch.float64)
    pred[0, 0, 0] = float("nan")
    assert torch.isnan(si_loss(pred, torch.ones(1, 4, 4, dtype=torch.float64)))
