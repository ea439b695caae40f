import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sculptor.errors import InputError
from sculptor.metrics import (
    IDENTICAL,
    SsimConfig,
    area_resample,
    cosine_similarity,
    get_descriptor,
    patch_descriptor,
    psnr,
    register_descriptor,
    ssim,
)

from oracles import naive_ssim


def test_ssim_self_is_one(rng):
    for _ in range(10):
        x = rng.uniform(size=(40, 37))
        assert abs(ssim(x, x) - 1.0) <= 1e-12


def test_ssim_zeros_vs_ones_matches_naive():
    a, b = np.zeros((24, 24)), np.ones((24, 24))
    assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-9)


def test_ssim_matches_naive_on_random_pairs(rng):
    for _ in range(20):
        a, b = rng.uniform(size=(64, 64)), rng.uniform(size=(64, 64))
        b = np.clip(0.6 * a + 0.4 * b, 0, 1)
        assert abs(ssim(a, b) - naive_ssim(a, b)) <= 1e-9


def test_ssim_symmetric(rng):
    for _ in range(50):
        a, b = rng.uniform(size=(20, 20)), rng.uniform(size=(20, 20))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_ssim_bounded(seed):
    r = np.random.default_rng(seed)
    a, b = r.uniform(size=(16, 16)), r.uniform(size=(16, 16))
    assert -1 <= ssim(a, b) <= 1


def test_ssim_errors():
    with pytest.raises(InputError):
        ssim(np.zeros((20, 20)), np.zeros((20, 21)))
    with pytest.raises(InputError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))
    with pytest.raises(InputError):
        SsimConfig(window=10)


def test_psnr(rng):
    x = rng.uniform(size=(10, 10))
    assert psnr(x, x) is IDENTICAL
    a = np.zeros((10, 10))
    assert psnr(a, a + 0.1) == pytest.approx(20.0)
    b = rng.uniform(size=(10, 10))
    assert psnr(x, b) == pytest.approx(10 * math.log10(1 / np.mean((x - b) ** 2)), abs=1e-9)
    with pytest.raises(InputError):
        psnr(a, np.zeros((3, 3)))


def test_cosine_examples():
    v = np.array([0.3, -2, 5])
    assert cosine_similarity(v, v) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(0.974631846, abs=1e-9)
    with pytest.raises(InputError, match="zero-norm feature"):
        cosine_similarity([0, 0], [1, 1])
    with pytest.raises(InputError):
        cosine_similarity([1, 2], [1, 2, 3])


@given(c=st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3), seed=st.integers(0, 1000))
def test_cosine_scaling(c, seed):
    f = np.random.default_rng(seed).normal(size=8)
    assert cosine_similarity(f, c * f) == pytest.approx(1.0 if c > 0 else -1.0, abs=1e-12)


def naive_area_average(img, g):
    # Integer block averaging (input size divisible by g).
    s = img.shape[0] // g
    return np.array([[img[i * s : (i + 1) * s, j * s : (j + 1) * s].mean() for j in range(g)] for i in range(g)])


def test_descriptor_matches_box_filter_oracle():
    y, x = np.mgrid[0:64, 0:64]
    img = (0.3 * x + 0.7 * y) / 63.0
    oracle = naive_area_average(img, 8).ravel()
    oracle -= oracle.mean()
    oracle /= np.linalg.norm(oracle)
    np.testing.assert_allclose(patch_descriptor(img, 8), oracle, atol=1e-9)


def test_fractional_area_resample_preserves_mean(rng):
    img = rng.uniform(size=(37, 23))
    out = area_resample(img, 8, 5)
    assert out.shape == (8, 5) and out.mean() == pytest.approx(img.mean(), abs=1e-12)


def test_descriptor_constant_is_zero():
    assert not np.any(patch_descriptor(np.full((30, 30), 0.4)))


def test_descriptor_norm_and_copy(rng):
    img = rng.uniform(size=(50, 40))
    d = patch_descriptor(img)
    assert d.size == 256 and np.linalg.norm(d) == pytest.approx(1.0, abs=1e-9)
    assert cosine_similarity(d, patch_descriptor(img.copy())) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), shift=st.floats(-0.5, 0.5), scale=st.floats(0.1, 10))
def test_descriptor_affine_invariance(seed, shift, scale):
    img = np.random.default_rng(seed).uniform(size=(32, 32))
    d = patch_descriptor(img)
    assert cosine_similarity(d, patch_descriptor(img + shift)) == pytest.approx(1.0, abs=1e-9)
    assert cosine_similarity(d, patch_descriptor(img * scale)) == pytest.approx(1.0, abs=1e-9)


def test_descriptor_registry():
    register_descriptor("flat-test", lambda img: np.asarray(img, float).ravel())
    assert get_descriptor("flat-test")(np.ones((2, 2))).size == 4
    with pytest.raises(InputError, match="unknown descriptor"):
        get_descriptor("dinov2")
