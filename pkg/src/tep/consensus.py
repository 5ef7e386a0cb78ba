"""Neighbourhood voting of clipped local edge masks into the edge function V."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError
from .image_core import ImageGrid, Window
from .local_segmentation import (LAMBDA_NORMALIZED, LAMBDA_RAW, LocalEdgeMask, clip_edges,
                                 extract_edges, segment_response)
from .patch_response import (compute_response, default_delta, normalize_response,
                             repair_center)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TepConfig:
    r: int = 3
    R: int = 20
    lam: float | None = None
    delta: int | None = None
    normalize: bool = True
    image_range: float = 255.0

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", default_delta(self.r))
        if self.lam is None:
            object.__setattr__(self, "lam", LAMBDA_NORMALIZED if self.normalize else LAMBDA_RAW)
        self.validate()

    def validate(self) -> None:
        if not self.r > 0:
            raise ConfigError(f"r must be a positive integer (got {self.r})")
        if not self.R > self.r:
            raise ConfigError(f"R must exceed r (got r={self.r}, R={self.R})")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be > 0 (got {self.lam})")
        if not 0 < self.delta < self.R:
            raise ConfigError(f"delta must satisfy 0 < delta < R={self.R} (got {self.delta})")
        if not self.image_range > 0:
            raise ConfigError(f"image_range must be > 0 (got {self.image_range})")

    @property
    def margin(self) -> int:
        """Distance from the image border to the first observer pixel."""
        return self.R + self.r

    @property
    def reach(self) -> int:
        """Chebyshev radius of an observer's clipped support."""
        return self.R - self.r - 1


@dataclass
class EdgeFunction:
    """Consensus map with its integer accumulators.

    ``hits`` counts edge votes, ``votes`` counts observers whose clipped
    support covered the pixel, ``valid`` marks the observer (eroded) domain.
    """

    hits: np.ndarray
    votes: np.ndarray
    valid: np.ndarray
    window: int = 0
    V: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.finalize()

    @classmethod
    def empty(cls, shape, window: int = 0) -> "EdgeFunction":
        return cls(hits=np.zeros(shape, dtype=np.int64), votes=np.zeros(shape, dtype=np.int64),
                   valid=np.zeros(shape, dtype=bool), window=window)

    @classmethod
    def from_values(cls, V: np.ndarray) -> "EdgeFunction":
        """Wrap an externally supplied V (e.g. loaded from disk) with a trivial normalizer."""
        V = np.asarray(V, dtype=np.float64)
        edge = cls.empty(V.shape)
        edge.valid[:] = True
        edge.V = np.clip(V, 0.0, 1.0)
        return edge

    def finalize(self) -> np.ndarray:
        V = np.zeros(self.hits.shape, dtype=np.float64)
        np.divide(self.hits, self.votes, out=V, where=self.votes > 0)
        self.V = V
        return V

    def scaled_by_window(self) -> np.ndarray:
        """Accumulator divided by ``(2R+1)**2`` instead of the per-pixel vote count."""
        if self.window <= 0:
            raise ValueError("window size unknown for this edge function")
        return self.hits / float((2 * self.window + 1) ** 2)

    def as_grid(self) -> ImageGrid:
        return ImageGrid(self.V)


def accumulate(acc: EdgeFunction, mask: LocalEdgeMask, window: Window) -> None:
    """Add a clipped mask into the accumulator and count votes on its support."""
    if not mask.clipped:
        raise ValueError("only clipped masks may be accumulated")
    rows, cols = window.slices()
    n = 2 * window.half_width + 1
    if mask.values.shape != (n, n):
        raise ValueError("mask does not match the window size")
    if rows.start < 0 or cols.start < 0 or rows.stop > acc.hits.shape[0] or cols.stop > acc.hits.shape[1]:
        raise ValueError(f"window at {window.center} exceeds the accumulator")
    acc.hits[rows, cols] += mask.values
    acc.votes[rows, cols] += _clipped_support(mask, window.half_width)
    acc.valid[window.center] = True
    acc.finalize()


def _clipped_support(mask: LocalEdgeMask, R: int) -> np.ndarray:
    # pixels farther than r from the window frame; the rest can never be voted
    off = np.abs(np.arange(-R, R + 1))
    cheb = np.maximum(off[:, None], off[None, :])
    return (R - cheb > mask.r).astype(np.int64)


def observer_mask(img: ImageGrid, x: tuple[int, int], cfg: TepConfig) -> LocalEdgeMask:
    """Steps 1-2 of the detector for a single observer, through the public API."""
    resp = repair_center(compute_response(img, x, cfg.r, cfg.R), cfg.delta)
    if cfg.normalize:
        resp = normalize_response(resp, cfg.image_range)
    return clip_edges(extract_edges(segment_response(resp, cfg.lam)), cfg.r)


def observer_domain(shape, cfg: TepConfig) -> tuple[range, range]:
    m = cfg.margin
    return range(m, shape[0] - m), range(m, shape[1] - m)


def _check_size(img: ImageGrid, cfg: TepConfig) -> None:
    need = 2 * cfg.margin
    if min(img.height, img.width) <= need:
        raise ConfigError(f"image {img.height}x{img.width} too small: min dimension must "
                          f"exceed 2(R+r) = {need}")


def detect_edges(img: ImageGrid, cfg: TepConfig = TepConfig(), threads: int | None = None) -> EdgeFunction:
    """Compute the consensus edge function of ``img``.

    Observer rows are split into contiguous chunks, each accumulated into
    private integer arrays and summed at the end, so the result does not
    depend on the thread count.
    """
    cfg.validate()
    _check_size(img, cfg)
    rows, cols = observer_domain(img.shape, cfg)
    threads = threads or os.cpu_count() or 1
    threads = max(1, min(int(threads), len(rows)))
    scale = 1.0 / cfg.image_range ** 2 if cfg.normalize else 1.0
    U = np.ascontiguousarray(img.data)
    chunks = np.array_split(np.arange(rows.start, rows.stop, dtype=np.int64), threads)

    def work(chunk):
        hits = np.zeros(img.shape, dtype=np.int64)
        votes = np.zeros(img.shape, dtype=np.int64)
        _kernels.detect_rows(U, chunk, cols.start, cols.stop, cfg.r, cfg.R, cfg.delta,
                             scale, float(cfg.lam), hits, votes)
        return hits, votes

    logger.info("detect: %d observers, r=%d R=%d lambda=%g delta=%d, %d thread(s)",
                len(rows) * len(cols), cfg.r, cfg.R, cfg.lam, cfg.delta, threads)
    if threads == 1:
        parts = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    hits = sum(p[0] for p in parts)
    votes = sum(p[1] for p in parts)
    valid = np.zeros(img.shape, dtype=bool)
    valid[rows.start:rows.stop, cols.start:cols.stop] = True
    return EdgeFunction(hits=hits, votes=votes, valid=valid, window=cfg.R)


def detect_edges_reference(img: ImageGrid, cfg: TepConfig, order=None) -> EdgeFunction:
    """Slow observer-by-observer path through the public per-window API.

    ``order`` optionally permutes the observer sequence.
    """
    cfg.validate()
    _check_size(img, cfg)
    rows, cols = observer_domain(img.shape, cfg)
    observers = [(i, j) for i in rows for j in cols]
    if order is not None:
        observers = [observers[k] for k in order]
    acc = EdgeFunction.empty(img.shape, window=cfg.R)
    for x in observers:
        mask = observer_mask(img, x, cfg)
        acc.hits[Window(x, cfg.R).slices()] += mask.values
        acc.votes[Window(x, cfg.R).slices()] += _clipped_support(mask, cfg.R)
        acc.valid[x] = True
    acc.finalize()
    return acc
