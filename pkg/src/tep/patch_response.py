"""Patch responses over the comparison window and their center repair."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .image_core import ImageGrid


@dataclass(frozen=True)
class PatchResponse:
    """Response map ``values[o + R]`` for offsets ``o = y - x`` with ``|o|_inf <= R``."""

    center: tuple[int, int]
    half_width: int
    values: np.ndarray = field(repr=False)
    normalized: bool = False
    repaired: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        n = 2 * self.half_width + 1
        if vals.shape != (n, n):
            raise ValueError(f"response for R={self.half_width} must be {n}x{n}, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def default_delta(r: int) -> int:
    """Exclusion half-width: 5 for ``r >= 10``, otherwise 2."""
    return 5 if r >= 10 else 2


def compute_response(img: ImageGrid, x: tuple[int, int], r: int, R: int) -> PatchResponse:
    """Mean squared difference between the patch at ``x`` and every patch in ``B_R(x)``."""
    if r < 0 or R <= r:
        raise ValueError(f"need 0 <= r < R, got r={r}, R={R}")
    if not img.contains_box(x, R + r):
        raise ValueError(f"window B_{R + r}({x}) exceeds the {img.height}x{img.width} image")
    out = np.empty((2 * R + 1, 2 * R + 1))
    _kernels.response_window(img.data, int(x[0]), int(x[1]), r, R, out)
    return PatchResponse(center=tuple(x), half_width=R, values=out)


def repair_center(resp: PatchResponse, delta: int) -> PatchResponse:
    """Replace the ``|y - x|_inf <= delta`` core by the mean of the rest of the window."""
    R = resp.half_width
    if not 0 < delta < R:
        raise ValueError(f"need 0 < delta < R, got delta={delta}, R={R}")
    vals = resp.values.copy()
    _kernels.repair_window(vals, R, delta)
    return replace(resp, values=vals, repaired=True)


def normalize_response(resp: PatchResponse, image_range: float) -> PatchResponse:
    """Divide by ``image_range**2`` so 8-bit responses land in [0, 1]."""
    if not image_range > 0:
        raise ValueError(f"image range must be positive, got {image_range}")
    return replace(resp, values=resp.values / float(image_range) ** 2, normalized=True)
