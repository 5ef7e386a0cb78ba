import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import best_straight_split, naive_edge_mask, naive_energy
from tep.local_segmentation import (LocalEdgeMask, SegmentationResult, clip_edges,
                                    extract_edges, segment_response, segmentation_energy)


def half_split(n=41, col=20):
    vals = np.zeros((n, n))
    vals[:, col:] = 1.0
    return vals


def critical_lambda(vals):
    # K=2 energy along the midline is lam * L^2 (1/A0 + 1/A1); K=1 energy is the variance sum
    n = vals.shape[0]
    E1 = float(np.sum((vals - vals.mean()) ** 2))
    A1 = int(vals.sum())
    A0 = vals.size - A1
    return E1 / (n * n * (1 / A0 + 1 / A1))


def test_constant_response_is_one_phase():
    seg = segment_response(np.full((11, 11), 0.25), 0.015)
    assert seg.K == 1 and seg.energy == 0.0
    assert np.all(extract_edges(seg).values == 0)


def test_half_split_finds_midline():
    vals = half_split()
    seg = segment_response(vals, 0.015)
    assert seg.K == 2
    chi = np.asarray(seg.chi)
    assert np.all(chi[:, :20] == chi[0, 0]) and np.all(chi[:, 20:] != chi[0, 0])
    e_ref, K_ref, chi_ref = best_straight_split(vals, 0.015)
    assert K_ref == 2 and seg.energy == pytest.approx(e_ref, rel=1e-12)
    mask = extract_edges(seg).values
    assert np.all(mask[:, 19] == 1) and mask.sum() == 41


def test_critical_lambda_switches_phase_count():
    vals = half_split()
    lam_star = critical_lambda(vals)
    assert lam_star == pytest.approx((820 * 861) ** 2 / 1681 ** 3, rel=1e-12)
    for lam, K in ((0.99 * lam_star, 2), (1.01 * lam_star, 1)):
        assert best_straight_split(vals, lam)[1] == K
        assert segment_response(vals, lam).K == K


def test_energy_history_is_monotone_and_reproducible(rng):
    vals = rng.random((21, 21))
    vals[:, 10:] += 0.8
    seg = segment_response(vals, 0.015)
    h = np.array(seg.history)
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]))
    assert seg.energy == pytest.approx(segmentation_energy(vals, seg.chi, 0.015), rel=1e-9)
    assert seg.energy == pytest.approx(naive_energy(vals, seg.chi, 0.015), rel=1e-9)
    assert seg.energy <= seg.energy_one_phase
    assert sum(seg.areas) == vals.size


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        segment_response(np.zeros((5, 5)), 0.0)
    with pytest.raises(ValueError):
        segment_response(np.full((5, 5), np.nan), 0.1)


@given(arrays(np.float64, (9, 9), elements=st.floats(0, 1)), st.floats(1e-3, 1.0))
def test_label_swap_symmetry(vals, lam):
    seg = segment_response(vals, lam)
    swapped = 1 - np.asarray(seg.chi)
    if seg.K == 2:
        assert segmentation_energy(vals, swapped, lam) == pytest.approx(seg.energy, rel=1e-12, abs=1e-15)
        flip = SegmentationResult(K=2, chi=swapped, means=seg.means[::-1], energy=seg.energy,
                                  perimeters=seg.perimeters, areas=seg.areas[::-1], lam=lam)
        assert np.array_equal(extract_edges(flip).values, extract_edges(seg).values)


@given(arrays(np.float64, (9, 9), elements=st.floats(0, 1)), st.sampled_from([0.25, 4.0, 16.0]))
def test_joint_scaling_keeps_labeling(vals, s):
    lam = 0.05
    a = segment_response(vals, lam)
    b = segment_response(vals * s, lam * s * s)
    assert a.K == b.K
    if a.K == 2:
        assert np.array_equal(a.chi, b.chi) or np.array_equal(a.chi, 1 - np.asarray(b.chi))


def test_edge_mask_vertical_split():
    chi = np.zeros((5, 5), dtype=np.int8)
    chi[:, 3:] = 1
    seg = SegmentationResult(K=2, chi=chi, means=(0, 1), energy=0, perimeters=(5, 5),
                             areas=(15, 10), lam=1)
    mask = extract_edges(seg).values
    expected = np.zeros((5, 5), dtype=int)
    expected[:, 2] = 1
    assert np.array_equal(mask, expected)


def test_edge_mask_checkerboard():
    chi = (np.add.outer(np.arange(4), np.arange(4)) % 2).astype(np.int8)
    seg = SegmentationResult(K=2, chi=chi, means=(0, 1), energy=0, perimeters=(24, 24),
                             areas=(8, 8), lam=1)
    mask = extract_edges(seg).values
    expected = np.ones((4, 4), dtype=int)
    expected[3, 3] = 0
    assert np.array_equal(mask, expected)
    assert np.array_equal(mask, naive_edge_mask(chi.tolist()))


@given(arrays(np.int8, (6, 7), elements=st.integers(0, 1)))
def test_edge_mask_matches_forward_difference_oracle(chi):
    K = 2 if chi.min() != chi.max() else 1
    seg = SegmentationResult(K=K, chi=chi, means=(0,) * K, energy=0, perimeters=(0,) * K,
                             areas=(0,) * K, lam=1)
    assert np.array_equal(extract_edges(seg).values, naive_edge_mask(chi.tolist()))


def test_clip_examples():
    R, r = 10, 3
    center = np.zeros((21, 21), dtype=np.int8)
    center[R, R] = 1
    assert np.array_equal(clip_edges(LocalEdgeMask(center), r).values, center)
    ring = np.zeros((21, 21), dtype=np.int8)
    ring[[0, -1], :] = 1
    ring[:, [0, -1]] = 1
    assert clip_edges(LocalEdgeMask(ring), 1).values.sum() == 0
    line = np.zeros((21, 21), dtype=np.int8)
    line[:, 10] = 1
    assert clip_edges(LocalEdgeMask(line), r).values.sum() == 2 * (R - r - 1) + 1 == 13


@given(arrays(np.int8, (15, 15), elements=st.integers(0, 1)), st.integers(0, 6))
def test_clip_keeps_only_deep_interior(vals, r):
    out = clip_edges(LocalEdgeMask(vals), r)
    off = np.abs(np.arange(-7, 8))
    cheb = np.maximum(off[:, None], off[None, :])
    assert np.array_equal(out.values, np.where(7 - cheb > r, vals, 0))
    with pytest.raises(ValueError):
        clip_edges(out, r)
