"""Pixel-lattice containers, column-wise patch extraction and raster IO.

Coordinates are ``(row, col)`` pairs indexing ``data[row, col]``.  Patches
are vectorized column by column, left to right, each column top to bottom.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, ImageIOError, NumericalError

logger = logging.getLogger(__name__)

RAW_MAGIC = "TEPF1"
_HIGH_DEPTH_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N"}


def _frozen_float(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ImageGrid:
    """Immutable 2D scalar field stored as a ``(height, width)`` float64 array."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen_float(self.data)
        if data.ndim != 2:
            raise ValueError(f"ImageGrid needs a 2D array, got shape {data.shape}")
        if data.size == 0:
            raise ValueError("ImageGrid must not be empty")
        if not np.all(np.isfinite(data)):
            raise NumericalError("ImageGrid values must be finite")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def contains_box(self, center: tuple[int, int], half_width: int) -> bool:
        """True when the square of half-width ``half_width`` around ``center`` fits."""
        row, col = center
        return (half_width <= row < self.height - half_width
                and half_width <= col < self.width - half_width)


@dataclass(frozen=True)
class ColorImage:
    """Three-channel RGB image stored as ``(height, width, 3)`` float64."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen_float(self.data)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"ColorImage needs shape (h, w, 3), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericalError("ColorImage values must be finite")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> tuple[ImageGrid, ImageGrid, ImageGrid]:
        return tuple(ImageGrid(self.data[:, :, k]) for k in range(3))

    @classmethod
    def from_gray(cls, img: ImageGrid) -> "ColorImage":
        return cls(np.repeat(img.data[:, :, None], 3, axis=2))


@dataclass(frozen=True)
class PatchVector:
    center: tuple[int, int]
    half_width: int
    values: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return (2 * self.half_width + 1) ** 2


@dataclass(frozen=True)
class Window:
    center: tuple[int, int]
    half_width: int

    def slices(self) -> tuple[slice, slice]:
        row, col = self.center
        h = self.half_width
        return slice(row - h, row + h + 1), slice(col - h, col + h + 1)


def patch_array(data: np.ndarray, center: tuple[int, int], r: int) -> np.ndarray:
    row, col = center
    return data[row - r:row + r + 1, col - r:col + r + 1]


def vectorize_patch(block: np.ndarray) -> np.ndarray:
    """Column-wise (left to right) flattening of a square block."""
    return np.asarray(block).ravel(order="F")


def extract_patch(img: ImageGrid, center: tuple[int, int], r: int) -> PatchVector:
    if r < 0:
        raise ValueError("patch half-width must be non-negative")
    if not img.contains_box(center, r):
        raise ValueError(f"patch of half-width {r} at {center} exceeds the "
                         f"{img.height}x{img.width} image")
    values = vectorize_patch(patch_array(img.data, center, r)).copy()
    values.setflags(write=False)
    return PatchVector(center=tuple(center), half_width=r, values=values)


# ---------------------------------------------------------------- raster IO

def _open_raster(path) -> Image.Image:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ImageIOError(f"input file not found: {path}")
    try:
        im = Image.open(path)
        im.load()
    except UnidentifiedImageError as exc:
        raise ImageIOError(f"unsupported image format: {path}") from exc
    except OSError as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    if im.format not in ("PNG", "PPM"):
        raise ImageIOError(f"unsupported image format {im.format!r}: {path}")
    if im.width == 0 or im.height == 0:
        raise ImageIOError(f"zero-size image: {path}")
    return im


def _to_float_array(im: Image.Image) -> np.ndarray:
    """Return ``(h, w)`` or ``(h, w, 3)`` float64 values scaled to [0, 255]."""
    if im.mode in _HIGH_DEPTH_MODES:
        return np.asarray(im, dtype=np.float64) * (255.0 / 65535.0)
    if im.mode == "1":
        return np.asarray(im, dtype=np.float64) * 255.0
    if im.mode == "L":
        return np.asarray(im, dtype=np.float64)
    if im.mode in ("LA",):
        return np.asarray(im.convert("L"), dtype=np.float64)
    # palette, RGBA, RGB ... alpha is dropped
    return np.asarray(im.convert("RGB"), dtype=np.float64)


def brightness(rgb: np.ndarray) -> np.ndarray:
    """Euclidean norm of the RGB vector at each pixel."""
    return np.sqrt(np.sum(np.square(rgb, dtype=np.float64), axis=-1))


def load_image(path) -> ImageGrid:
    """Load a PNG/PGM/PPM raster as a grayscale grid.

    Color inputs become their brightness ``|U0|``; note this ranges up to
    ``255 * sqrt(3)`` for white.  High bit-depth inputs are rescaled to
    [0, 255] by dividing by the 16-bit maximum.
    """
    values = _to_float_array(_open_raster(path))
    if values.ndim == 3:
        values = brightness(values)
    return ImageGrid(values)


def load_color_image(path) -> ColorImage:
    values = _to_float_array(_open_raster(path))
    if values.ndim == 2:
        values = np.repeat(values[:, :, None], 3, axis=2)
    return ColorImage(values)


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Clip to [0, 255] and round half up."""
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


def normalize_to_uint8(values: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        logger.warning("degenerate range (min = max = %g); writing an all-zero image", lo)
        return np.zeros(values.shape, dtype=np.uint8)
    return to_uint8((values - lo) * (255.0 / (hi - lo)))


def write_png(array: np.ndarray, path) -> None:
    try:
        Image.fromarray(array).save(os.fspath(path), format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def save_scalar_map(map: ImageGrid | np.ndarray, path,
                    mode: Literal["raw-float", "normalized-8bit"] = "raw-float") -> None:
    data = map.data if isinstance(map, ImageGrid) else np.asarray(map, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise NumericalError("cannot save a map with non-finite values")
    if mode == "raw-float":
        save_raw(data, path)
    elif mode == "normalized-8bit":
        write_png(normalize_to_uint8(data), path)
    else:
        raise ConfigError(f"unknown map mode {mode!r}; expected raw-float or normalized-8bit")


def save_color_image(img: ColorImage | np.ndarray, path) -> None:
    """Write an RGB PNG; values are clipped to [0, 255]."""
    data = img.data if isinstance(img, ColorImage) else np.asarray(img)
    write_png(to_uint8(data), path)


def save_raw(data: np.ndarray, path) -> None:
    """Write ``TEPF1 <width> <height> [<channels>]\\n`` then little-endian float64 row-major."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim not in (2, 3):
        raise ValueError("raw-float grids must be 2D or (h, w, c)")
    dims = [data.shape[1], data.shape[0]] + ([data.shape[2]] if data.ndim == 3 else [])
    try:
        with open(os.fspath(path), "wb") as fh:
            fh.write((" ".join([RAW_MAGIC] + [str(n) for n in dims]) + "\n").encode("ascii"))
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def load_raw_array(path) -> np.ndarray:
    """Read a raw-float dump as ``(h, w)`` or ``(h, w, c)``."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            header = fh.readline()
            payload = fh.read()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    parts = header.decode("ascii", errors="replace").split()
    if len(parts) not in (3, 4) or parts[0] != RAW_MAGIC:
        raise ImageIOError(f"not a {RAW_MAGIC} raw-float grid: {path}")
    try:
        dims = [int(p) for p in parts[1:]]
    except ValueError as exc:
        raise ImageIOError(f"malformed {RAW_MAGIC} header in {path}") from exc
    if min(dims) <= 0:
        raise ImageIOError(f"zero-size raw grid: {path}")
    width, height = dims[0], dims[1]
    shape = (height, width) + tuple(dims[2:])
    expected = 8 * int(np.prod(shape))
    if len(payload) != expected:
        raise ImageIOError(f"truncated raw grid {path}: expected {expected} "
                           f"bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).copy()


def load_raw(path) -> ImageGrid:
    data = load_raw_array(path)
    if data.ndim != 2:
        raise ImageIOError(f"expected a single-channel raw grid: {path}")
    return ImageGrid(data)


def is_raw(path) -> bool:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ImageIOError(f"input file not found: {path}")
    with open(path, "rb") as fh:
        return fh.read(len(RAW_MAGIC)) == RAW_MAGIC.encode("ascii")


def load_scalar_map(path) -> ImageGrid:
    """Load a raw-float grid, or any supported raster as grayscale."""
    if is_raw(path):
        return load_raw(path)
    return load_image(path)
