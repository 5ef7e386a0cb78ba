import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import naive_close_1d
from tep.consensus import EdgeFunction
from tep.edge_segmentation import (BLACK_DIRECTION, DiffusionConfig, brightness_energy,
                                   chromaticity_energy, close_along, decompose, diffuse_brightness,
                                   diffuse_chromaticity, edge_stopping, line_footprint,
                                   refine_junctions, remainder_display, segment_image, split_cb)
from tep.errors import ConfigError, NumericalError
from tep.image_core import ColorImage, ImageGrid
from tep.synthetic import two_texture

ONES = lambda shape: ImageGrid(np.ones(shape))  # noqa: E731
ZEROS = lambda shape: ImageGrid(np.zeros(shape))  # noqa: E731


def gray_color(img):
    return ColorImage(np.repeat(img.data[:, :, None], 3, axis=2) / np.sqrt(3))


def test_config_validation():
    for kw in ({"alpha": 0}, {"dt": 0}, {"gamma1": -1}, {"iters": 1.5}):
        with pytest.raises(ConfigError):
            DiffusionConfig(**kw)


def test_split_examples():
    cb = split_cb(ColorImage(np.array([[[3.0, 0.0, 4.0], [0.0, 0.0, 0.0]]])))
    assert cb.brightness.data.tolist() == [[5.0, 0.0]]
    np.testing.assert_allclose(cb.chromaticity[0, 0], [0.6, 0.0, 0.8], rtol=1e-15)
    np.testing.assert_allclose(cb.chromaticity[0, 1], np.ones(3) / np.sqrt(3), rtol=1e-15)
    np.testing.assert_allclose(cb.recombine().data, [[[3, 0, 4], [0, 0, 0]]], atol=1e-12)


def test_edge_stopping_values():
    g = edge_stopping(np.array([[0.0, 0.5, 1.0]]), 0.2).data[0]
    p = 0.5 ** 0.2
    assert g[0] == 1.0 and g[2] == 0.0
    assert g[1] == pytest.approx((1 - p) / (1 + p), rel=1e-14)
    assert g[1] == pytest.approx(0.0693, abs=5e-4)
    with pytest.raises(ValueError):
        edge_stopping(np.array([[1.5]]), 0.2)


@pytest.mark.parametrize("alpha", [0.05, 0.2, 1.0, 3.0])
def test_edge_stopping_strictly_decreasing(alpha):
    g = edge_stopping(np.linspace(0, 1, 1001)[None, :], alpha).data[0]
    assert np.all(np.diff(g) < 0)


def test_zero_conductivity_keeps_image(rng):
    U = ImageGrid(rng.uniform(0, 255, (12, 12)))
    out = diffuse_brightness(U, ZEROS((12, 12)), DiffusionConfig(iters=50))
    assert np.array_equal(out.data, U.data)


def test_heat_equilibrium_is_mean(rng):
    U = ImageGrid(rng.uniform(0, 255, (32, 32)))
    cfg = DiffusionConfig(gamma1=0.0, dt=0.2, iters=10_000, tol=0.0)
    out = diffuse_brightness(U, ONES((32, 32)), cfg).data
    assert np.max(np.abs(out - U.data.mean())) <= 0.01 * U.data.mean()
    assert out.mean() == pytest.approx(U.data.mean(), rel=1e-10)


def test_heavy_smoothing_reduces_variance(rng):
    U = ImageGrid(rng.uniform(0, 255, (32, 32)))
    out = diffuse_brightness(U, ONES((32, 32)), DiffusionConfig(gamma1=0.001, iters=300)).data
    assert out.var() < 0.05 * U.data.var()


def test_unstable_step_rejected():
    with pytest.raises(ConfigError):
        diffuse_brightness(ZEROS((4, 4)), ONES((4, 4)), DiffusionConfig(dt=0.3))


def test_blow_up_guard(monkeypatch):
    import tep.edge_segmentation as es
    monkeypatch.setattr(es, "stable_dt", lambda g_max, weight: 10.0)
    U = ImageGrid(np.random.default_rng(0).uniform(0, 1, (8, 8)))
    with pytest.raises(NumericalError):
        diffuse_brightness(U, ONES((8, 8)), DiffusionConfig(dt=2.0, iters=200, tol=0))


@settings(max_examples=20)
@given(arrays(np.float64, (10, 10), elements=st.floats(0, 255)),
       arrays(np.float64, (10, 10), elements=st.floats(0, 1)), st.floats(0, 0.5))
def test_brightness_energy_never_increases(U0, V, gamma1):
    g = edge_stopping(V, 0.2)
    cfg = DiffusionConfig(gamma1=gamma1, dt=0.1, iters=40, tol=0)
    trace = []
    diffuse_brightness(ImageGrid(U0), g, cfg, trace=trace)
    e = np.array(trace)
    assert np.all(np.diff(e) <= 1e-9 * max(e[0], 1.0))
    assert e[0] == pytest.approx(brightness_energy(U0, U0, g.data, gamma1))


@settings(max_examples=20)
@given(arrays(np.float64, (10, 10), elements=st.floats(0, 255)),
       arrays(np.float64, (10, 10), elements=st.floats(0, 1)))
def test_maximum_principle(U0, V):
    cfg = DiffusionConfig(gamma1=0.0, iters=60, tol=0)
    out = diffuse_brightness(ImageGrid(U0), edge_stopping(V, 0.2), cfg).data
    assert out.min() >= U0.min() - 1e-9 and out.max() <= U0.max() + 1e-9


def unit_field(seed, shape=(10, 10)):
    C = np.abs(np.random.default_rng(seed).normal(size=shape + (3,))) + 0.01
    return C / np.linalg.norm(C, axis=2, keepdims=True)


def test_constant_unit_field_is_fixed():
    C = np.broadcast_to(np.array([0.6, 0.0, 0.8]), (6, 6, 3)).copy()
    out = diffuse_chromaticity(C, ONES((6, 6)), DiffusionConfig(gamma2=0.0, dt=0.1, iters=100))
    np.testing.assert_allclose(out, C, atol=1e-15)


def test_norm_decay_follows_scalar_recursion():
    dt, beta, n0 = 0.1, 1.0, 2.0
    C = np.broadcast_to(n0 * np.array([0.6, 0.0, 0.8]), (5, 5, 3)).copy()
    cfg = DiffusionConfig(gamma2=0.0, beta=beta, dt=dt, iters=1, tol=0)
    norms = [n0]
    for _ in range(20):
        C = diffuse_chromaticity(C, ZEROS((5, 5)), cfg, renormalize=False)
        norms.append(float(np.linalg.norm(C[2, 2])))
    expected = [1 + (n0 - 1) * (1 - dt * beta) ** k for k in range(21)]
    np.testing.assert_allclose(norms, expected, rtol=1e-12)
    assert np.all(np.diff(norms) < 0) and norms[-1] > 1


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31), arrays(np.float64, (10, 10), elements=st.floats(0, 1)))
def test_chromaticity_is_unit_norm(seed, V):
    C = unit_field(seed)
    trace = []
    out = diffuse_chromaticity(C, edge_stopping(V, 0.2), DiffusionConfig(iters=30, tol=0), trace=trace)
    np.testing.assert_allclose(np.linalg.norm(out, axis=2), 1.0, atol=1e-9)
    e = np.array(trace)
    assert np.all(np.diff(e) <= 1e-9 * max(e[0], 1.0))
    assert e[0] == pytest.approx(chromaticity_energy(C, C, edge_stopping(V, 0.2).data, 0.05, 1.0))


def test_black_pixels_keep_convention():
    C = np.zeros((4, 4, 3))
    out = diffuse_chromaticity(C, ONES((4, 4)), DiffusionConfig(iters=5))
    assert np.allclose(out, BLACK_DIRECTION)


def test_full_edges_mean_identity(rng):
    img = ColorImage(rng.uniform(0, 255, (8, 8, 3)))
    out = segment_image(img, np.ones((8, 8)), DiffusionConfig(iters=20))
    np.testing.assert_allclose(out.data, img.data, rtol=1e-12, atol=1e-10)


def test_decompose_is_additive(rng):
    img = ColorImage(rng.uniform(0, 255, (6, 7, 3)))
    seg = ColorImage(rng.uniform(0, 255, (6, 7, 3)))
    rem = decompose(img, seg)
    # one rounding per subtraction and one per addition, so at most a couple of ulps
    np.testing.assert_allclose(seg.data + rem.data, img.data, rtol=0, atol=4 * np.spacing(255.0))
    assert np.array_equal(rem.data, img.data - seg.data)
    assert np.all(remainder_display(decompose(img, img)) == 128)


def test_two_texture_segmentation():
    gray = two_texture(size=64, seed=4)
    img = gray_color(gray)
    V = np.zeros((64, 64))
    V[:, 31:33] = 1.0
    cfg = DiffusionConfig(gamma1=0.01, gamma2=0.01, iters=500)
    out = split_cb(segment_image(img, V, cfg)).brightness.data
    src = gray.data
    left, right = slice(4, 28), slice(36, 60)
    contrast_in = src[:, right].mean() - src[:, left].mean()
    contrast_out = out[:, right].mean() - out[:, left].mean()
    assert abs(contrast_out - contrast_in) <= 0.1 * contrast_in
    for cols in (left, right):
        assert out[:, cols].var() * 5 <= src[:, cols].var()
    rem = decompose(img, segment_image(img, V, cfg)).data
    seg = segment_image(img, V, cfg).data
    assert rem[:, left].var() > seg[:, left].var()


def test_line_footprints():
    assert line_footprint(5, 0)[2].tolist() == [True] * 5 and line_footprint(5, 0).sum() == 5
    assert np.array_equal(line_footprint(5, 90), line_footprint(5, 0).T)
    assert np.array_equal(line_footprint(5, 135), np.eye(5, dtype=bool))
    for bad in (4, 1):
        with pytest.raises(ConfigError):
            line_footprint(bad, 0)


def test_refine_zero_map():
    out = refine_junctions(np.zeros((12, 12)))
    assert np.all(out.V == 0)


def test_refine_fills_one_pixel_gap():
    strip = np.ones((1, 9))
    strip[0, 4] = 0.0
    closed = close_along(strip, line_footprint(5, 0)[2:3])
    assert np.all(closed == 1.0)
    V = np.zeros((9, 9))
    V[4] = strip[0]
    out = refine_junctions(V, line_length=5, n_orientations=1).V
    assert out[4, 4] == 1.0 and out[4].tolist() == [1.0] * 9


@given(arrays(np.float64, (1, 15), elements=st.floats(0, 1)), st.sampled_from([3, 5, 7]))
def test_horizontal_closing_matches_1d_oracle(row, L):
    got = close_along(row, line_footprint(L, 0)[L // 2:L // 2 + 1])
    np.testing.assert_allclose(got[0], naive_close_1d(row[0].tolist(), L), rtol=0, atol=0)


@settings(max_examples=20)
@given(arrays(np.float64, (12, 12), elements=st.floats(0, 1)), st.sampled_from([0, 45, 90, 135]))
def test_closing_is_idempotent_and_extensive(V, angle):
    fp = line_footprint(5, angle)
    once = close_along(V, fp)
    assert np.all(once >= V - 1e-15)
    assert np.array_equal(close_along(once, fp), once)


def test_refine_keeps_validity_and_range():
    E = EdgeFunction.empty((10, 10), window=4)
    E.valid[3:7, 3:7] = True
    out = refine_junctions(E, 5)
    assert np.array_equal(out.valid, E.valid) and out.window == 4
    with pytest.raises(ConfigError):
        refine_junctions(E, 5, n_orientations=0)
