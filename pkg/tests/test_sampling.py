import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from zonedepth.nn.sampling import sample_inverse_cdf, sample_zones

# inverse-normal quantiles at 0.125, 0.375, 0.625, 0.875 scaled by 0.1 around 2.0
QUANTILES_2_01 = [1.8849650619623992, 1.9681360636035625, 2.0318639363964375, 2.1150349380376008]


def test_zero_variance_gives_mean():
    np.testing.assert_array_equal(sample_inverse_cdf(1.3, 0.0, 7), np.full(7, 1.3))


def test_single_sample_is_mean():
    assert sample_inverse_cdf(2.5, 0.09, 1).tolist() == [2.5]


def test_quantile_oracle():
    np.testing.assert_allclose(sample_inverse_cdf(2.0, 0.01, 4), QUANTILES_2_01, atol=1e-12)


def test_uniform_branch_spans_two_sigma():
    s = sample_inverse_cdf(2.0, 0.01, 4, uniform=True)
    np.testing.assert_allclose(s, [1.85, 1.95, 2.05, 2.15])
    assert not np.allclose(s, sample_inverse_cdf(2.0, 0.01, 4))


def test_moments_at_1024_samples():
    s = sample_inverse_cdf(2.0, 0.04, 1024, min_range=None, max_range=None)
    assert abs(s.mean() - 2.0) / 2.0 < 0.01
    assert abs(s.std() - 0.2) / 0.2 < 0.01


def test_clamping_to_sensor_range():
    s = sample_inverse_cdf(3.9, 0.25, 16)
    assert s.max() == 4.0 and s.min() >= 0.02


def test_errors():
    with pytest.raises(ValueError):
        sample_inverse_cdf(1.0, -0.1, 4)
    with pytest.raises(ValueError):
        sample_inverse_cdf(1.0, 0.1, 0)


@given(mean=st.floats(0.1, 3.9), var=st.floats(0, 1), n=st.integers(1, 64))
def test_sorted_and_symmetric(mean, var, n):
    s = sample_inverse_cdf(mean, var, n, min_range=None, max_range=None)
    assert np.all(np.diff(s) >= 0)
    np.testing.assert_allclose(s - mean, -(s - mean)[::-1], atol=1e-9)


def test_batched_matches_scalar():
    means = torch.tensor([[1.0, 2.0], [3.0, 0.5]], dtype=torch.float64)
    var = torch.tensor([[0.01, 0.0], [0.2, 0.04]], dtype=torch.float64)
    out = sample_zones(means, var, 8, False, 0.02, 4.0)
    assert out.shape == (2, 2, 8)
    for i in range(2):
        for j in range(2):
            np.testing.assert_allclose(out[i, j].numpy(), sample_inverse_cdf(means[i, j].item(), var[i, j].item(), 8))
