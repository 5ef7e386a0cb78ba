"""Synthetic test scenes with known edges, plus noise models."""

from __future__ import annotations

import numpy as np

from .image_core import ImageGrid
from .random_field import FieldSpec, sample_fields


def _texture(mu, sigma, ell, shape, rng):
    return sample_fields(FieldSpec(mu=mu, sigma=sigma, ell=ell), shape[0], shape[1], 1, rng)[0]


def two_texture(size: int = 128, boundary: int | None = None, means=(32.0, 224.0),
                sigma: float = 10.0, ell: float = 0.5, seed: int = 0) -> ImageGrid:
    """Two Gaussian fields split by a vertical line; columns ``< boundary`` are the left field."""
    rng = np.random.default_rng(seed)
    boundary = size // 2 if boundary is None else boundary
    left = _texture(means[0], sigma, ell, (size, size), rng)
    right = _texture(means[1], sigma, ell, (size, size), rng)
    cols = np.arange(size)[None, :]
    return ImageGrid(np.where(cols < boundary, left, right))


def four_junction(size: int = 128, means=((40.0, 160.0), (220.0, 100.0)), sigma: float = 10.0,
                  ell: float = 0.5, seed: int = 0) -> ImageGrid:
    """Four quadrants meeting at ``(size // 2, size // 2)``; ``means[i][j]`` is row band i, column band j."""
    rng = np.random.default_rng(seed)
    half = size // 2
    rows = (np.arange(size) >= half)[:, None]
    cols = (np.arange(size) >= half)[None, :]
    out = np.zeros((size, size))
    for i in range(2):
        for j in range(2):
            field = _texture(means[i][j], sigma, ell, (size, size), rng)
            sel = (rows == bool(i)) & (cols == bool(j))
            out[sel] = field[sel]
    return ImageGrid(out)


def checkerboard_vs_noise(size: int = 128, cell: int = 8, values=(64.0, 192.0),
                          noise_mean: float = 128.0, noise_sigma: float = 30.0,
                          seed: int = 0) -> ImageGrid:
    """Coarse checkerboard on the left half, fine i.i.d. noise on the right."""
    rng = np.random.default_rng(seed)
    rr, cc = np.mgrid[0:size, 0:size]
    board = np.where(((rr // cell) + (cc // cell)) % 2 == 0, values[0], values[1])
    noise = noise_mean + noise_sigma * rng.standard_normal((size, size))
    return ImageGrid(np.where(cc < size // 2, board, noise))


def stripes(size: int = 160, period: int = 8, on: int = 3, values=(0.0, 255.0)) -> ImageGrid:
    """Vertical stripes: ``on`` bright columns out of every ``period``."""
    cols = np.arange(size)
    profile = np.where(cols % period < on, values[1], values[0])
    return ImageGrid(np.tile(profile, (size, 1)))


def salt_and_pepper(img: ImageGrid, fraction: float, seed: int = 0,
                    low: float = 0.0, high: float = 255.0) -> ImageGrid:
    """Replace ``fraction`` of the pixels by ``low`` or ``high`` with equal odds."""
    if not 0 <= fraction <= 1:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    hit = rng.random(img.shape) < fraction
    salt = rng.random(img.shape) < 0.5
    out = img.data.copy()
    out[hit & salt] = high
    out[hit & ~salt] = low
    return ImageGrid(out)


def gaussian_noise(img: ImageGrid, variance: float, seed: int = 0,
                   image_range: float = 255.0) -> ImageGrid:
    """Additive noise with ``variance`` in normalized units, clipped back to the range."""
    rng = np.random.default_rng(seed)
    scaled = img.data / image_range + np.sqrt(variance) * rng.standard_normal(img.shape)
    return ImageGrid(np.clip(scaled, 0.0, 1.0) * image_range)
