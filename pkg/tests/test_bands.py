import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from spamoe.bands import (band_centers, decompose, gaussian_band_masks, hard_band_masks, make_masks,
                          nearest_band)
from spamoe.errors import InvalidConfig, InvalidInput
from spamoe.metrics import radial_coordinates
from spamoe.tensor import dft_centered, dft_oracle


def test_centers():
    np.testing.assert_array_equal(band_centers(3), [0.0, 0.5, 1.0])
    with pytest.raises(InvalidConfig):
        band_centers(1)


def test_mask_is_one_at_center_and_exp_minus_five_at_half():
    m = gaussian_band_masks(9, 9, 3, 20.0)
    r = radial_coordinates(9, 9)
    assert m.masks[0][4, 4] == 1.0
    assert m.masks[2][0, 0] == 1.0
    from spamoe.bands import gaussian_profile
    assert abs(gaussian_profile(0.5, 0.0, 20.0) - np.exp(-5)) < 1e-12
    assert np.all(m.masks > 0) and np.all(m.masks <= 1)
    np.testing.assert_allclose(m.masks[1], np.exp(-20 * (r - 0.5) ** 2), atol=1e-15)


def test_masks_are_cached_and_read_only():
    a = gaussian_band_masks(8, 8)
    assert gaussian_band_masks(8, 8) is a
    with pytest.raises(ValueError):
        a.masks[0, 0, 0] = 2.0


def test_radial_symmetry_of_masks():
    m = gaussian_band_masks(11, 11, 4, 7.0)
    r = radial_coordinates(11, 11)
    for k in range(4):
        vals = {}
        for rv, mv in zip(np.round(r, 12).ravel(), m.masks[k].ravel()):
            vals.setdefault(rv, set()).add(mv)
        assert all(len(v) == 1 for v in vals.values())


def test_hard_masks_partition():
    m = hard_band_masks(10, 7, 3)
    np.testing.assert_array_equal(m.masks.sum(axis=0), np.ones((10, 7)))
    assert set(np.unique(m.masks)) == {0.0, 1.0}


def test_hard_tie_and_nearest_rules():
    assert nearest_band(0.5, 2) == 0
    assert nearest_band(0.4999, 2) == 0
    assert nearest_band(0.5001, 2) == 1
    assert nearest_band(0.4, 3) == 1
    assert nearest_band(0.25, 3) == 0
    r = radial_coordinates(5, 5)
    m = hard_band_masks(5, 5, 2)
    np.testing.assert_array_equal(m.masks[0] == 1, r <= 0.5 + 1e-12)


def test_unknown_kind():
    with pytest.raises(InvalidConfig):
        make_masks(4, 4, kind="triangle")


def test_identity_mask_returns_input(rng):
    z = torch.from_numpy(rng.standard_normal((2, 6, 6)))
    bands = decompose(z, torch.ones(1, 6, 6))
    torch.testing.assert_close(bands[0], z, atol=1e-10, rtol=0)


def test_hard_bands_reconstruct(rng):
    z = torch.from_numpy(rng.standard_normal((3, 8, 9)))
    bands = decompose(z, hard_band_masks(8, 9, 3))
    torch.testing.assert_close(bands.sum(0), z, atol=1e-9, rtol=0)


def test_soft_bands_match_oracle_product(rng):
    z = rng.standard_normal((1, 8, 8))
    masks = gaussian_band_masks(8, 8)
    bands = decompose(torch.from_numpy(z), masks).numpy()
    assert np.abs(bands.sum(0) - z).max() > 1e-3
    for k in range(3):
        expected = dft_oracle(z[0]) * masks.masks[k]
        assert np.abs(dft_centered(bands[k, 0]) - expected).max() < 1e-9


def test_decompose_shape_checks(rng):
    with pytest.raises(InvalidInput):
        decompose(torch.zeros(2, 6, 6), gaussian_band_masks(5, 5))
    with pytest.raises(InvalidInput):
        decompose(torch.zeros(6, 6), gaussian_band_masks(6, 6))


def test_soft_lipschitz_bound_and_hard_jumps():
    gamma = 20.0
    r = radial_coordinates(32, 32)
    soft = gaussian_band_masks(32, 32, 3, gamma).masks
    bound = np.sqrt(2 * gamma / np.e)
    for m in soft:
        for axis in (0, 1):
            dm = np.abs(np.diff(m, axis=axis))
            dr = np.abs(np.diff(r, axis=axis))
            assert np.all(dm <= bound * dr + 1e-12)
    hard = hard_band_masks(32, 32, 3).masks
    assert np.abs(np.diff(hard, axis=1)).max() == 1.0


def test_band_energy_concentrates_near_center(rng):
    gamma = 20.0
    H = W = 48
    r = radial_coordinates(H, W)
    masks = gaussian_band_masks(H, W, 3, gamma)
    z = rng.standard_normal((1, H, W))
    bands = decompose(torch.from_numpy(z), masks).numpy()
    p = np.abs(dft_centered(bands[1, 0])) ** 2
    mean_r = (p * r).sum() / p.sum()
    assert abs(mean_r - 0.5) < 2 / np.sqrt(gamma)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_decompose_linear(a, b, seed):
    g = np.random.default_rng(seed)
    z1, z2 = (torch.from_numpy(g.standard_normal((2, 6, 7))) for _ in range(2))
    masks = gaussian_band_masks(6, 7)
    lhs = decompose(a * z1 + b * z2, masks)
    rhs = a * decompose(z1, masks) + b * decompose(z2, masks)
    torch.testing.assert_close(lhs, rhs, atol=1e-10, rtol=0)
