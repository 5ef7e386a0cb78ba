import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from oracles import naive_patch
from tep.errors import ImageIOError, NumericalError
from tep.image_core import (ColorImage, ImageGrid, extract_patch, load_color_image, load_image,
                            load_raw, load_raw_array, load_scalar_map, save_raw, save_scalar_map)


def test_grid_rejects_non_finite_and_bad_shapes():
    with pytest.raises(NumericalError):
        ImageGrid(np.array([[0.0, np.nan]]))
    with pytest.raises(ValueError):
        ImageGrid(np.zeros(4))
    with pytest.raises(ValueError):
        ImageGrid(np.zeros((0, 3)))


def test_grid_is_immutable():
    g = ImageGrid(np.zeros((2, 3)))
    assert (g.width, g.height) == (3, 2)
    assert g.data.size == g.width * g.height
    with pytest.raises(ValueError):
        g.data[0, 0] = 1.0


def test_load_constant_gray_png(tmp_path):
    p = tmp_path / "c.png"
    Image.fromarray(np.full((3, 3), 128, dtype=np.uint8)).save(p)
    g = load_image(p)
    assert g.shape == (3, 3)
    assert np.all(g.data == 128.0)


def test_color_pixel_brightness_is_euclidean_norm(tmp_path):
    p = tmp_path / "c.png"
    Image.fromarray(np.array([[[3, 0, 4]]], dtype=np.uint8)).save(p)
    assert load_image(p).data[0, 0] == 5.0
    assert np.array_equal(load_color_image(p).data[0, 0], [3.0, 0.0, 4.0])


def test_sixteen_bit_png_rescaled_by_max_value(tmp_path):
    raw = np.array([[0, 65535], [257, 32768]], dtype=np.uint16)
    p = tmp_path / "d.png"
    Image.fromarray(raw).save(p)
    expected = np.array([[0.0, 255.0], [1.0, 32768 * 255 / 65535]])
    np.testing.assert_allclose(load_image(p).data, expected, rtol=0, atol=1e-12)


def test_ascii_and_binary_netpbm(tmp_path):
    pgm = tmp_path / "a.pgm"
    pgm.write_text("P2\n2 2\n255\n0 10\n20 255\n")
    np.testing.assert_array_equal(load_image(pgm).data, [[0, 10], [20, 255]])
    ppm = tmp_path / "b.ppm"
    ppm.write_bytes(b"P6\n1 1\n255\n" + bytes([3, 0, 4]))
    assert load_image(ppm).data[0, 0] == 5.0


def test_io_errors(tmp_path):
    with pytest.raises(ImageIOError):
        load_image(tmp_path / "missing.png")
    bad = tmp_path / "junk.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(ImageIOError):
        load_image(bad)
    gif = tmp_path / "x.gif"
    Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(gif)
    with pytest.raises(ImageIOError):
        load_image(gif)
    with pytest.raises(ImageIOError):
        load_scalar_map(tmp_path / "missing.raw")


def test_patch_r0_is_the_pixel():
    img = ImageGrid(np.arange(12.0).reshape(3, 4))
    pv = extract_patch(img, (1, 2), 0)
    assert pv.dim == 1 and pv.values.tolist() == [6.0]


def test_patch_is_column_major():
    img = ImageGrid(np.arange(1.0, 10.0).reshape(3, 3))
    # columns of [[1,2,3],[4,5,6],[7,8,9]] read top to bottom
    assert extract_patch(img, (1, 1), 1).values.tolist() == [1, 4, 7, 2, 5, 8, 3, 6, 9]


def test_patch_constant_image():
    img = ImageGrid(np.full((9, 9), 2.5))
    assert np.all(extract_patch(img, (4, 4), 3).values == 2.5)


def test_patch_out_of_bounds():
    with pytest.raises(ValueError):
        extract_patch(ImageGrid(np.zeros((5, 5))), (1, 1), 2)


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_patch_slots_biject_with_offsets(r):
    n = 2 * r + 1
    # encode each offset uniquely so every slot can be traced back
    codes = np.arange(n * n, dtype=float).reshape(n, n)
    vals = extract_patch(ImageGrid(codes), (r, r), r).values
    assert sorted(vals.tolist()) == list(range(n * n))
    for k, v in enumerate(vals):
        i, j = divmod(int(v), n)
        assert k == j * n + i


@given(arrays(np.float64, (7, 9), elements=st.floats(-100, 100)), st.integers(0, 2))
def test_patch_matches_naive_and_transposes(data, r):
    img = ImageGrid(data)
    c = (3, 4)
    pv = extract_patch(img, c, r).values
    assert pv.tolist() == naive_patch(data, c, r)
    n = 2 * r + 1
    pt = extract_patch(ImageGrid(data.T), (c[1], c[0]), r).values
    perm = np.arange(n * n).reshape(n, n).T.ravel()
    assert np.array_equal(pt, pv[perm])


def test_scalar_map_8bit_midpoint_and_degenerate(tmp_path, caplog):
    p = tmp_path / "m.png"
    save_scalar_map(ImageGrid(np.array([[0.0, 0.5, 1.0]])), p, mode="normalized-8bit")
    assert np.asarray(Image.open(p)).tolist() == [[0, 128, 255]]
    with caplog.at_level(logging.WARNING):
        save_scalar_map(np.full((2, 2), 3.0), p, mode="normalized-8bit")
    assert "degenerate" in caplog.text
    assert np.asarray(Image.open(p)).max() == 0


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_raw_round_trip_is_bit_exact(tmp_path_factory, data):
    p = tmp_path_factory.mktemp("raw") / "g.raw"
    save_scalar_map(ImageGrid(data), p, mode="raw-float")
    back = load_raw(p).data
    assert back.tobytes() == data.astype("<f8").tobytes()
    with open(p, "rb") as fh:
        assert fh.readline() == f"TEPF1 {data.shape[1]} {data.shape[0]}\n".encode()


def test_raw_rejects_truncation(tmp_path):
    p = tmp_path / "g.raw"
    save_raw(np.zeros((3, 3)), p)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ImageIOError):
        load_raw(p)


def test_raw_three_channels(tmp_path):
    data = np.random.default_rng(0).normal(size=(2, 3, 3))
    save_raw(data, tmp_path / "c.raw")
    assert np.array_equal(load_raw_array(tmp_path / "c.raw"), data)
    with pytest.raises(ImageIOError):
        load_raw(tmp_path / "c.raw")


def test_color_image_channels():
    c = ColorImage(np.arange(12.0).reshape(2, 2, 3))
    assert [ch.data[0, 0] for ch in c.channels] == [0.0, 1.0, 2.0]
