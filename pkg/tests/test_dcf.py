import numpy as np
import pytest

from cdtrack.dcf import (
    ChannelSelection,
    FreqFilter,
    TrainingSet,
    locate,
    loss,
    response,
    solve_filter,
)
from cdtrack.errors import (
    DimensionMismatchError,
    EmptySelectionError,
    SingularSystemError,
)
from cdtrack.labels import LabelConfig, gaussian_label

from oracles import dense_ridge_filter, random_training_set, spatial_loss


def test_single_channel_solution_matches_scalar_formula():
    rng = np.random.default_rng(0)
    ts = random_training_set(rng, n=1, d=1, shape=(6, 6), lam=0.5)
    flt = solve_filter(ts, ChannelSelection.full(1))
    fhat = np.fft.fft2(ts.samples[0, 0])
    yhat = np.fft.fft2(ts.label)
    # conjugated filter g solves (lam + |f|^2) g = conj(f) y per bin
    expected_g = np.conj(fhat) * yhat / (np.abs(fhat) ** 2 + ts.lam)
    assert np.abs(np.conj(flt.planes[0]) - expected_g).max() < 1e-10


def test_zero_features_give_zero_filter():
    ts = TrainingSet(samples=np.zeros((2, 3, 5, 5)), label=np.ones((5, 5)), lam=0.1)
    flt = solve_filter(ts, ChannelSelection.full(3))
    assert np.abs(flt.planes).max() == 0.0


def test_solution_matches_dense_oracle_n3_c2():
    rng = np.random.default_rng(1)
    ts = random_training_set(rng, n=3, d=3, shape=(8, 8), lam=1e-2)
    sel = ChannelSelection.from_indices([0, 2], 3)
    spatial = solve_filter(ts, sel).spatial()
    oracle = dense_ridge_filter(ts, sel)
    rel = np.linalg.norm(spatial - oracle) / np.linalg.norm(oracle)
    assert rel < 1e-6


@pytest.mark.parametrize("seed", range(6))
def test_solution_matches_dense_oracle_random(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 5))
    d = int(rng.integers(1, 5))
    shape = (int(rng.integers(2, 9)), int(rng.integers(2, 9)))
    c = int(rng.integers(1, min(d, 3) + 1))
    lam = float(rng.choice([1e-2, 1.0]))
    ts = random_training_set(rng, n=n, d=d, shape=shape, lam=lam, weighted=True)
    sel = ChannelSelection.from_indices(sorted(rng.choice(d, c, replace=False).tolist()), d)
    spatial = solve_filter(ts, sel).spatial()
    oracle = dense_ridge_filter(ts, sel)
    rel = np.linalg.norm(spatial - oracle) / max(np.linalg.norm(oracle), 1e-30)
    assert rel < 1e-6


def test_singular_unregularized_system_names_bin():
    # One sample, two channels: every per-bin Gram is rank one.
    rng = np.random.default_rng(2)
    ts = random_training_set(rng, n=1, d=2, shape=(4, 4), lam=0.0)
    with pytest.raises(SingularSystemError) as err:
        solve_filter(ts, ChannelSelection.full(2))
    assert "bin" in str(err.value)
    assert err.value.position is not None


def test_empty_selection_rejected():
    rng = np.random.default_rng(3)
    ts = random_training_set(rng, n=2, d=2, shape=(4, 4))
    with pytest.raises(EmptySelectionError):
        solve_filter(ts, ChannelSelection(np.zeros(2, dtype=bool)))


def test_loss_zero_filter_zero_label():
    ts = TrainingSet(samples=np.ones((2, 2, 4, 4)), label=np.zeros((4, 4)), lam=0.3)
    flt = FreqFilter(planes=np.zeros((2, 4, 4), dtype=complex), channel_indices=(0, 1))
    assert loss(ts, flt, ChannelSelection.full(2)) == 0.0


def test_loss_zero_filter_equals_weighted_label_energy():
    rng = np.random.default_rng(4)
    label = rng.standard_normal((5, 5))
    weights = np.array([0.7, 1.9, 1.1])
    ts = TrainingSet(samples=rng.standard_normal((3, 2, 5, 5)), label=label, weights=weights, lam=0.2)
    flt = FreqFilter(planes=np.zeros((2, 5, 5), dtype=complex), channel_indices=(0, 1))
    expected = float(weights.sum() * (label**2).sum())
    assert abs(loss(ts, flt, ChannelSelection.full(2)) - expected) < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_loss_matches_spatial_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    ts = random_training_set(rng, weighted=True)
    d = ts.d
    c = int(rng.integers(1, d + 1))
    sel = ChannelSelection.from_indices(sorted(rng.choice(d, c, replace=False).tolist()), d)
    flt = solve_filter(ts, sel)
    freq_value = loss(ts, flt, sel)
    spatial_value = spatial_loss(ts, flt.spatial(), sel)
    assert abs(freq_value - spatial_value) < 1e-9 * max(1.0, spatial_value)


def test_loss_of_nonsolved_filter_matches_oracle():
    rng = np.random.default_rng(5)
    ts = random_training_set(rng, n=2, d=3, shape=(6, 6))
    sel = ChannelSelection.full(3)
    spatial_planes = rng.standard_normal((3, 6, 6))
    planes = np.fft.fft2(spatial_planes, axes=(-2, -1))
    flt = FreqFilter(planes=planes, channel_indices=(0, 1, 2))
    assert abs(loss(ts, flt, sel) - spatial_loss(ts, spatial_planes, sel)) < 1e-9


def test_response_flat_filter_spectrum_returns_channel():
    rng = np.random.default_rng(6)
    fmap = rng.standard_normal((3, 5, 5))
    flt = FreqFilter(planes=np.ones((1, 5, 5), dtype=complex), channel_indices=(1,))
    out = response(fmap, flt, ChannelSelection.from_indices([1], 3))
    assert np.abs(out - fmap[1]).max() < 1e-10


def test_response_exact_fit_reproduces_label():
    rng = np.random.default_rng(7)
    ts = random_training_set(rng, n=1, d=1, shape=(6, 5), lam=0.0)
    flt = solve_filter(ts, ChannelSelection.full(1))
    out = response(ts.samples[0], flt, ChannelSelection.full(1))
    assert np.abs(out - ts.label).max() < 1e-8


def test_response_is_additive_over_channels():
    rng = np.random.default_rng(8)
    fmap = rng.standard_normal((2, 6, 6))
    planes = np.fft.fft2(rng.standard_normal((2, 6, 6)), axes=(-2, -1))
    both = FreqFilter(planes=planes, channel_indices=(0, 1))
    first = FreqFilter(planes=planes[:1], channel_indices=(0,))
    second = FreqFilter(planes=planes[1:], channel_indices=(1,))
    sel = ChannelSelection.full(2)
    combined = response(fmap, both, sel)
    split = response(fmap, first, sel) + response(fmap, second, sel)
    assert np.abs(combined - split).max() < 1e-10


def test_response_rejects_mismatched_dimensions():
    flt = FreqFilter(planes=np.ones((1, 4, 4), dtype=complex), channel_indices=(0,))
    with pytest.raises(DimensionMismatchError):
        response(np.zeros((1, 5, 5)), flt)


def test_locate_origin_peak():
    r = np.zeros((6, 6))
    r[0, 0] = 1.0
    assert locate(r) == (0, 0)


def test_locate_wraparound_convention():
    r = np.zeros((8, 8))
    r[7, 1] = 1.0
    assert locate(r) == (-1, 1)


def test_locate_circularly_shifted_label():
    lab = gaussian_label(LabelConfig(12, 12, 0.1), 6.0, 6.0)
    shifted = np.roll(lab, shift=(2, 3), axis=(0, 1))
    assert locate(shifted) == (2, 3)


def test_locate_tie_breaks_to_smallest_row_then_column():
    r = np.zeros((4, 4))
    r[2, 3] = 5.0
    r[1, 1] = 5.0
    assert locate(r) == (1, 1)


def test_locate_invariant_under_positive_affine_rescale():
    rng = np.random.default_rng(9)
    r = rng.standard_normal((7, 9))
    assert locate(r) == locate(3.5 * r + 11.0)


def test_solved_filter_is_local_minimum():
    rng = np.random.default_rng(10)
    ts = random_training_set(rng, n=3, d=3, shape=(5, 5), lam=1e-2)
    sel = ChannelSelection.full(3)
    flt = solve_filter(ts, sel)
    base = loss(ts, flt, sel)
    eps = 1e-4
    h, w = ts.plane_shape
    for _ in range(6):
        j = int(rng.integers(0, 3))
        iy, ix = int(rng.integers(0, h)), int(rng.integers(0, w))
        for delta in (eps, -eps, 1j * eps, -1j * eps):
            planes = flt.planes.copy()
            planes[j, iy, ix] += delta
            perturbed = FreqFilter(planes=planes, channel_indices=flt.channel_indices)
            assert loss(ts, perturbed, sel) >= base - 1e-12


def test_unselected_channels_are_inert():
    rng = np.random.default_rng(11)
    ts = random_training_set(rng, n=2, d=4, shape=(5, 5))
    sel = ChannelSelection.from_indices([1, 3], 4)
    flt = solve_filter(ts, sel)
    zeroed = ts.samples.copy()
    zeroed[:, [0, 2]] = 0.0
    ts_zeroed = TrainingSet(samples=zeroed, label=ts.label, weights=ts.weights, lam=ts.lam)
    flt_zeroed = solve_filter(ts_zeroed, sel)
    assert np.abs(flt.planes - flt_zeroed.planes).max() < 1e-12
    assert abs(loss(ts, flt, sel) - loss(ts_zeroed, flt_zeroed, sel)) < 1e-12


def test_freq_filter_requires_increasing_indices():
    with pytest.raises(ValueError):
        FreqFilter(planes=np.zeros((2, 3, 3), dtype=complex), channel_indices=(2, 1))
