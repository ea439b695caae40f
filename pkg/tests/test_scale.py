import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sculptor.errors import InputError
from sculptor.geometry import BBox2, DepthMap
from sculptor.scale import ScaleConfig, ScaleInput, mean_masked_depth, unified_scales

from oracles import random_rows, scale_oracle


def make(rows):
    return [ScaleInput(BBox2(0, 0, w, h), d, z) for w, h, d, z in rows]


def test_single_object_is_exactly_one():
    assert unified_scales([ScaleInput(BBox2(3, 4, 90, 60), 0.7, 12.5)]) == [1.0]


def test_two_objects_only_2d_factor():
    assert unified_scales(make([(100, 40, 1.0, 5.0), (50, 10, 1.0, 5.0)])) == [1.0, 0.5]


def test_three_objects_mixed():
    rows = [(120, 80, 1.3, 7.0), (60, 90, 0.9, 4.0), (40, 30, 1.1, 9.5)]
    assert unified_scales(make(rows)) == pytest.approx(scale_oracle(rows), abs=1e-12)


def test_thousand_random_inputs_match_scale_oracle(rng):
    for _ in range(1000):
        rows = random_rows(rng, int(rng.integers(1, 7)))
        got = unified_scales(make(rows))
        assert np.max(np.abs(np.array(got) - scale_oracle(rows))) <= 1e-12


def test_extreme_object_has_two_unit_factors():
    # Object 0 has the largest box, the smallest diagonal and the smallest depth.
    rows = [(200, 100, 0.5, 2.0), (80, 60, 0.9, 3.0), (50, 150, 1.2, 6.0)]
    assert unified_scales(make(rows))[0] == 1.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(2, 5))
def test_ratios_invariant_to_common_box_scaling(seed, k):
    rows = random_rows(np.random.default_rng(seed), 4)
    big = [(w * k, h * k, d, z) for w, h, d, z in rows]
    a, b = np.array(unified_scales(make(rows))), np.array(unified_scales(make(big)))
    np.testing.assert_allclose(a / a[0], b / b[0], rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_permutation_equivariant_and_positive(seed):
    rng = np.random.default_rng(seed)
    rows = random_rows(rng, 5)
    perm = rng.permutation(5)
    s = np.array(unified_scales(make(rows)))
    sp = np.array(unified_scales(make([rows[i] for i in perm])))
    assert np.array_equal(s[perm], sp)
    assert np.all(s > 0) and np.all(np.isfinite(s))


def test_invalid_inputs():
    with pytest.raises(InputError):
        ScaleInput(BBox2(0, 0, 2, 2), 0.0, 1.0)
    with pytest.raises(InputError):
        ScaleInput(BBox2(0, 0, 2, 2), 1.0, -1.0)
    with pytest.raises(InputError):
        unified_scales([])
    with pytest.raises(InputError):
        ScaleConfig("reciprocal")


def test_mean_masked_depth_examples():
    mask = np.zeros((4, 4), bool)
    mask[1:3, 1:3] = True
    assert mean_masked_depth(DepthMap(np.full((4, 4), 5.0), np.ones((4, 4), bool)), mask) == 5.0
    d = np.full((4, 4), 2.0)
    d[1:3, 2] = 4.0
    assert mean_masked_depth(DepthMap(d, np.ones((4, 4), bool)), mask) == 3.0
    with pytest.raises(InputError, match="no valid depth under mask"):
        mean_masked_depth(DepthMap(d, ~mask), mask)
    with pytest.raises(InputError):
        mean_masked_depth(DepthMap(d, np.ones((4, 4), bool)), np.ones((3, 3), bool))


def test_mean_masked_depth_matches_pixel_loop():
    from sculptor.synth import generate_scene

    s = generate_scene(1, seed=5, kinds=("sphere",))
    depth, mask = s.clean_depth, s.masks[0]
    total, count = 0.0, 0
    for y in range(mask.shape[0]):
        for x in range(mask.shape[1]):
            if mask[y, x] and depth.valid[y, x]:
                total += depth.depth[y, x]
                count += 1
    assert mean_masked_depth(depth, mask) == pytest.approx(total / count, abs=1e-12)
