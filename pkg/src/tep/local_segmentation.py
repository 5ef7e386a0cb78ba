"""One- or two-phase segmentation of a patch response and its local edge mask.

The two-phase energy for a labeling with boundary length ``L`` (count of
4-connected label changes; the window frame is not boundary) and phase
areas ``A0, A1`` is::

    lam * L**2 * (1/A0 + 1/A1) + sum_i sum_{y in phase i} (R(y) - c_i)**2

since each phase's perimeter equals ``L``.  With one phase the energy is the
un-normalized variance of the response.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .patch_response import PatchResponse

LAMBDA_NORMALIZED = 0.015
LAMBDA_RAW = 700.0


@dataclass(frozen=True)
class SegmentationResult:
    K: int
    chi: np.ndarray = field(repr=False)
    means: tuple[float, ...]
    energy: float
    perimeters: tuple[int, ...]
    areas: tuple[int, ...]
    lam: float
    energy_one_phase: float = float("nan")
    energy_two_phase: float = float("nan")
    history: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class LocalEdgeMask:
    values: np.ndarray = field(repr=False)
    clipped: bool = False
    r: int | None = None


def segmentation_energy(vals: np.ndarray, chi: np.ndarray, lam: float) -> float:
    """Evaluate the energy of a labeling directly from its definition."""
    vals = np.asarray(vals, dtype=np.float64)
    chi = np.asarray(chi)
    labels = np.unique(chi)
    if labels.size == 1:
        return float(np.sum((vals - vals.mean()) ** 2))
    L = int(np.count_nonzero(chi[:, 1:] != chi[:, :-1]) + np.count_nonzero(chi[1:, :] != chi[:-1, :]))
    fidelity = 0.0
    scale = 0.0
    for k in labels:
        phase = vals[chi == k]
        fidelity += float(np.sum((phase - phase.mean()) ** 2))
        scale += L / phase.size
    return lam * scale * L + fidelity


def _summarize(vals, chi, K, lam, E1, E2, history) -> SegmentationResult:
    if K == 1:
        chi = np.zeros_like(chi)
        means = (float(vals.mean()),)
        areas = (int(vals.size),)
        perimeters = (0,)
    else:
        L = int(_kernels.boundary_length(chi))
        means = tuple(float(vals[chi == k].mean()) for k in (0, 1))
        areas = tuple(int(np.count_nonzero(chi == k)) for k in (0, 1))
        perimeters = (L, L)
    chi = chi.astype(np.int8)
    chi.setflags(write=False)
    return SegmentationResult(
        K=K, chi=chi, means=means, energy=segmentation_energy(vals, chi, lam),
        perimeters=perimeters, areas=areas, lam=lam,
        energy_one_phase=E1, energy_two_phase=E2, history=tuple(history))


def segment_response(resp: PatchResponse | np.ndarray, lam: float) -> SegmentationResult:
    """Pick the lower-energy of one phase and the best two-phase labeling found.

    The two-phase candidate starts from the exact Otsu split of the values
    and is refined by alternating nearest-mean relabeling (accepted only if
    it lowers the energy) with single-pixel flips on phase boundaries that
    strictly lower the energy. Ties go to one phase.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    vals = resp.values if isinstance(resp, PatchResponse) else resp
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    if vals.ndim != 2 or not np.all(np.isfinite(vals)):
        raise ValueError("response must be a finite 2D array")
    labels = np.zeros(vals.shape, dtype=np.int8)
    trial = np.zeros(vals.shape, dtype=np.int8)
    history = np.empty(_kernels.MAX_SWEEPS + 2)
    K, E1, E2, n_hist = _kernels.segment_window(vals, float(lam), labels, trial, history)
    return _summarize(vals, labels, int(K), float(lam), float(E1), float(E2), history[:n_hist])


def extract_edges(seg: SegmentationResult) -> LocalEdgeMask:
    """Mark pixels whose label differs from the right or the lower neighbour."""
    mask = np.zeros(seg.chi.shape, dtype=np.int8)
    if seg.K == 2:
        _kernels.edge_mask(np.ascontiguousarray(seg.chi), mask)
    return LocalEdgeMask(values=mask, clipped=False)


def clip_edges(mask: LocalEdgeMask, r: int) -> LocalEdgeMask:
    """Zero every entry within Chebyshev distance ``r`` of the window frame."""
    if mask.clipped:
        raise ValueError("mask is already clipped")
    vals = np.array(mask.values, dtype=np.int8, copy=True)
    n = vals.shape[0]
    if vals.shape != (n, n) or n % 2 == 0:
        raise ValueError("edge mask must be a square window of odd size")
    _kernels.clip_mask(vals, (n - 1) // 2, r)
    return replace(mask, values=vals, clipped=True, r=r)
