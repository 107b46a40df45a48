import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from spamoe.errors import InvalidInput
from spamoe.preference import FrequencyPreference, affinity_gradient, band_affinity, mix_bands

CENTERS3 = np.array([0.0, 0.5, 1.0])


def test_hand_value_f_zero():
    pi = band_affinity(torch.tensor([0.0]), CENTERS3, 10.0)[0].numpy()
    s = np.array([0.0, -2.5, -10.0])
    np.testing.assert_allclose(pi, np.exp(s) / np.exp(s).sum(), atol=1e-15)
    np.testing.assert_allclose(pi, [0.924103, 0.075855, 0.000042], atol=1e-6)


def test_midway_two_bands_is_uniform():
    pi = band_affinity(torch.tensor([0.5]), [0.0, 1.0], 10.0)[0]
    np.testing.assert_allclose(pi.numpy(), [0.5, 0.5], atol=1e-15)


def test_sharp_limit_is_one_hot():
    pi = band_affinity(torch.tensor([0.5]), CENTERS3, 1e6)[0].numpy()
    np.testing.assert_allclose(pi, [0, 1, 0], atol=1e-12)


def test_default_init_spans_unit_interval():
    pref = FrequencyPreference(3)
    np.testing.assert_allclose(pref.f.detach().numpy(), [0.02, 0.5, 0.98], atol=1e-12)


def test_from_values_exact_zero():
    pref = FrequencyPreference.from_values([0.0, 1.0])
    np.testing.assert_array_equal(pref.f.detach().numpy(), [0.0, 1.0])


def test_mix_bands_examples():
    bands = torch.stack([torch.full((1, 2, 2), 4.0), torch.full((1, 2, 2), 8.0)])
    np.testing.assert_allclose(mix_bands(bands, torch.tensor([0.25, 0.75])).numpy(), 7.0)
    same = torch.stack([torch.arange(4.0).reshape(1, 2, 2)] * 3)
    torch.testing.assert_close(mix_bands(same, torch.tensor([0.2, 0.3, 0.5])), same[0])
    torch.testing.assert_close(mix_bands(list(bands), torch.tensor([0.0, 1.0])), bands[1])
    with pytest.raises(InvalidInput):
        mix_bands(bands, torch.tensor([1.0, 0.0, 0.0]))


def test_gradient_zero_upstream_and_symmetry():
    raw = np.array([0.3, -1.2])
    assert np.all(affinity_gradient(raw, CENTERS3, np.zeros((2, 3))) == 0)
    # f = 0.5 sits on the middle center with symmetric neighbors
    g = affinity_gradient(np.array([0.0]), CENTERS3, np.array([[1.0, 0.2, 1.0]]))
    assert abs(g[0]) < 1e-15


def test_gradient_matches_finite_differences_and_autograd(rng):
    raw = rng.normal(size=4)
    up = rng.normal(size=(4, 3))

    def loss(r):
        return float((band_affinity(torch.sigmoid(torch.from_numpy(r)), CENTERS3) .numpy() * up).sum())

    h = 1e-6
    fd = np.array([(loss(raw + h * e) - loss(raw - h * e)) / (2 * h) for e in np.eye(4)])
    g = affinity_gradient(raw, CENTERS3, up)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5
    r = torch.from_numpy(raw).requires_grad_()
    (band_affinity(torch.sigmoid(r), CENTERS3) * torch.from_numpy(up)).sum().backward()
    np.testing.assert_allclose(r.grad.numpy(), g, rtol=1e-10, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=6), st.integers(2, 7), st.floats(0.01, 100))
def test_rows_are_distributions_and_argmax_is_nearest(raw, K, eta):
    pref = FrequencyPreference(len(raw), eta)
    with torch.no_grad():
        pref.raw.copy_(torch.tensor(raw))
    centers = np.arange(K) / (K - 1)
    pi = pref.affinity(centers).detach().numpy()
    f = pref.f.detach().numpy()
    assert np.all((f >= 0) & (f <= 1))
    assert np.all(pi >= 0)
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-12)
    for fe, row in zip(f, pi):
        d = np.abs(fe - centers)
        nearest = np.flatnonzero(d <= d.min() + 1e-9)
        assert np.argmax(row) in nearest or np.isclose(row.max(), row[nearest].max(), rtol=1e-9)
