"""Edge-guided brightness/chromaticity diffusion and junction refinement.

The color image is split as ``U0 = Ub * Uc`` with ``Ub = |U0|`` and ``Uc`` a
unit vector.  Both parts are evolved by explicit gradient descent on

    E_b(U) = 1/2 sum_faces g_face |dU|^2 + gamma1/2 sum (U - Ub)^2
    E_c(U) = 1/2 sum_faces g_face |dU|^2 + gamma2/2 sum |U - Uc|^2
             + beta/2 sum (1 - |U|)^2

where ``g = (1 - V^alpha) / (1 + V^alpha)`` is frozen from the edge
function and face conductivities are the mean of the two pixel values.
Boundaries are zero-flux.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .consensus import EdgeFunction
from .errors import ConfigError, NumericalError
from .image_core import ColorImage, ImageGrid, to_uint8

logger = logging.getLogger(__name__)

EPS = 1e-6
BLACK_DIRECTION = np.full(3, 1.0 / np.sqrt(3.0))
BLOWUP_FACTOR = 10.0
STOP_TOL = 1e-6


@dataclass(frozen=True)
class DiffusionConfig:
    alpha: float = 0.2
    gamma1: float = 0.05
    gamma2: float = 0.05
    beta: float = 1.0
    dt: float = 0.1
    iters: int = 500
    tol: float = STOP_TOL

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0 (got {self.alpha})")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0 (got {self.dt})")
        for name in ("gamma1", "gamma2", "beta", "tol"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0 (got {getattr(self, name)})")
        if int(self.iters) != self.iters or self.iters < 0:
            raise ConfigError(f"iters must be a non-negative integer (got {self.iters})")


@dataclass(frozen=True)
class CBDecomposition:
    brightness: ImageGrid
    chromaticity: np.ndarray = field(repr=False)

    def recombine(self) -> ColorImage:
        return ColorImage(self.brightness.data[:, :, None] * self.chromaticity)


def split_cb(img: ColorImage) -> CBDecomposition:
    """Brightness is the RGB norm; chromaticity the direction, or (1,1,1)/sqrt(3) when black."""
    data = img.data
    Ub = np.sqrt(np.sum(data * data, axis=2))
    Uc = np.empty_like(data)
    lit = Ub > EPS
    Uc[lit] = data[lit] / Ub[lit, None]
    Uc[~lit] = BLACK_DIRECTION
    Uc.setflags(write=False)
    return CBDecomposition(brightness=ImageGrid(Ub), chromaticity=Uc)


def edge_stopping(V: EdgeFunction | np.ndarray, alpha: float) -> ImageGrid:
    vals = V.V if isinstance(V, EdgeFunction) else np.asarray(V, dtype=np.float64)
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0 (got {alpha})")
    if vals.size and (vals.min() < 0 or vals.max() > 1):
        raise ValueError("edge function must lie in [0, 1]")
    p = np.power(vals, alpha)
    return ImageGrid((1.0 - p) / (1.0 + p))


# ------------------------------------------------------------ discrete flow

def _face_conductivity(g):
    return 0.5 * (g[:, 1:] + g[:, :-1]), 0.5 * (g[1:, :] + g[:-1, :])


def _divergence(U, gx, gy):
    """div(g grad U) with zero flux across the frame; U is (h, w) or (h, w, c)."""
    if U.ndim == 3:
        gx, gy = gx[:, :, None], gy[:, :, None]
    fx = gx * (U[:, 1:] - U[:, :-1])
    fy = gy * (U[1:, :] - U[:-1, :])
    out = np.zeros_like(U)
    out[:, :-1] += fx
    out[:, 1:] -= fx
    out[:-1, :] += fy
    out[1:, :] -= fy
    return out


def _smoothness(U, gx, gy):
    if U.ndim == 3:
        gx, gy = gx[:, :, None], gy[:, :, None]
    return 0.5 * (np.sum(gx * (U[:, 1:] - U[:, :-1]) ** 2)
                  + np.sum(gy * (U[1:, :] - U[:-1, :]) ** 2))


def brightness_energy(U, U0, g, gamma1) -> float:
    gx, gy = _face_conductivity(np.asarray(g))
    return float(_smoothness(U, gx, gy) + 0.5 * gamma1 * np.sum((U - U0) ** 2))


def chromaticity_energy(U, U0, g, gamma2, beta) -> float:
    gx, gy = _face_conductivity(np.asarray(g))
    norm = np.sqrt(np.sum(U * U, axis=2))
    return float(_smoothness(U, gx, gy) + 0.5 * gamma2 * np.sum((U - U0) ** 2)
                 + 0.5 * beta * np.sum((1.0 - norm) ** 2))


def stable_dt(g_max: float, weight: float) -> float:
    """Largest step for which the explicit scheme is a descent step."""
    return 1.0 / (4.0 * g_max + weight)


def _check_inputs(U0, g, cfg: DiffusionConfig, weight: float) -> None:
    if g.shape != U0.shape[:2]:
        raise ValueError(f"conductivity shape {g.shape} does not match image {U0.shape[:2]}")
    if g.size and (g.min() < 0 or g.max() > 1):
        raise ValueError("conductivity must lie in [0, 1]")
    bound = stable_dt(float(g.max()), weight)
    if cfg.dt > bound:
        raise ConfigError(f"dt={cfg.dt} exceeds the stability bound 1/(4 max g + gamma) = {bound:.6g}")


def _guard(U, limit, step):
    if not np.all(np.isfinite(U)) or np.max(np.abs(U)) > limit:
        raise NumericalError(f"diffusion diverged at step {step}: |U| exceeded {limit:.6g}")


def diffuse_brightness(Ub: ImageGrid, g: ImageGrid, cfg: DiffusionConfig = DiffusionConfig(),
                       trace: list | None = None) -> ImageGrid:
    """Explicit descent on the brightness functional with fidelity pulling toward ``Ub``.

    If ``trace`` is a list, the energy before the first step and after
    every step is appended to it.
    """
    U0 = Ub.data
    gv = g.data
    _check_inputs(U0, gv, cfg, cfg.gamma1)
    gx, gy = _face_conductivity(gv)
    limit = BLOWUP_FACTOR * max(float(np.max(np.abs(U0))), 1.0)
    U = U0.copy()
    if trace is not None:
        trace.append(brightness_energy(U, U0, gv, cfg.gamma1))
    for step in range(int(cfg.iters)):
        change = cfg.dt * (_divergence(U, gx, gy) - cfg.gamma1 * (U - U0))
        U += change
        _guard(U, limit, step)
        if trace is not None:
            trace.append(brightness_energy(U, U0, gv, cfg.gamma1))
        if np.max(np.abs(change)) < cfg.tol:
            logger.debug("brightness converged after %d steps", step + 1)
            break
    return ImageGrid(U)


def diffuse_chromaticity(Uc: np.ndarray, g: ImageGrid, cfg: DiffusionConfig = DiffusionConfig(),
                         renormalize: bool = True, trace: list | None = None) -> np.ndarray:
    """Channel-wise descent with fidelity and a penalty pulling norms back to one."""
    U0 = np.asarray(Uc, dtype=np.float64)
    if U0.ndim != 3 or U0.shape[2] != 3:
        raise ValueError(f"chromaticity must be (h, w, 3), got {U0.shape}")
    gv = g.data
    _check_inputs(U0, gv, cfg, cfg.gamma2 + cfg.beta)
    gx, gy = _face_conductivity(gv)
    limit = BLOWUP_FACTOR * max(float(np.max(np.abs(U0))), 1.0)
    U = U0.copy()
    if trace is not None:
        trace.append(chromaticity_energy(U, U0, gv, cfg.gamma2, cfg.beta))
    for step in range(int(cfg.iters)):
        norm = np.sqrt(np.sum(U * U, axis=2, keepdims=True))
        pull = np.zeros_like(U)
        np.divide(U, norm, out=pull, where=norm > 0)
        change = cfg.dt * (_divergence(U, gx, gy) - cfg.gamma2 * (U - U0)
                           - cfg.beta * (U - pull))
        U += change
        _guard(U, limit, step)
        if trace is not None:
            trace.append(chromaticity_energy(U, U0, gv, cfg.gamma2, cfg.beta))
        if np.max(np.abs(change)) < cfg.tol:
            logger.debug("chromaticity converged after %d steps", step + 1)
            break
    if renormalize:
        norm = np.sqrt(np.sum(U * U, axis=2))
        lit = norm > EPS
        U[lit] /= norm[lit, None]
        U[~lit] = BLACK_DIRECTION
    return U


def segment_image(img: ColorImage, V: EdgeFunction | np.ndarray,
                  cfg: DiffusionConfig = DiffusionConfig()) -> ColorImage:
    """Smooth brightness and chromaticity inside regions while keeping V-edges."""
    vals = V.V if isinstance(V, EdgeFunction) else np.asarray(V)
    if vals.shape != (img.height, img.width):
        raise ValueError(f"edge function {vals.shape} does not match image "
                         f"{(img.height, img.width)}")
    g = edge_stopping(vals, cfg.alpha)
    cb = split_cb(img)
    Ub = diffuse_brightness(cb.brightness, g, cfg)
    Uc = diffuse_chromaticity(cb.chromaticity, g, cfg)
    return ColorImage(Ub.data[:, :, None] * Uc)


def decompose(img: ColorImage, segmented: ColorImage) -> ColorImage:
    """Texture remainder ``img - segmented`` (raw, may be negative)."""
    if img.data.shape != segmented.data.shape:
        raise ValueError("images must have the same dimensions")
    return ColorImage(img.data - segmented.data)


def remainder_display(remainder: ColorImage) -> np.ndarray:
    """8-bit view of a remainder, zero mapped to 128."""
    return to_uint8(remainder.data + 128.0)


# ---------------------------------------------------------- junction repair

def line_footprint(line_length: int, angle_deg: float) -> np.ndarray:
    """Centered digital segment of ``line_length`` pixels at ``angle_deg`` (counter-clockwise from +x)."""
    if line_length < 3 or line_length % 2 == 0:
        raise ConfigError(f"line_length must be odd and >= 3 (got {line_length})")
    half = line_length // 2
    theta = np.deg2rad(angle_deg)
    dx, dy = np.cos(theta), -np.sin(theta)
    # step along the dominant axis so the segment has exactly line_length pixels
    scale = 1.0 / max(abs(dx), abs(dy))
    k = np.arange(-half, half + 1)
    cols = np.rint(k * dx * scale).astype(int)
    rows = np.rint(k * dy * scale).astype(int)
    fp = np.zeros((2 * half + 1, 2 * half + 1), dtype=bool)
    fp[rows + half, cols + half] = True
    return fp


def close_along(V: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Grey closing; outside the image counts as neutral for each step."""
    dil = ndimage.grey_dilation(V, footprint=footprint, mode="constant", cval=-np.inf)
    return ndimage.grey_erosion(dil, footprint=footprint, mode="constant", cval=np.inf)


def refine_junctions(V: EdgeFunction | np.ndarray, line_length: int = 9,
                     n_orientations: int = 4) -> EdgeFunction:
    """Per-pixel maximum of line closings at ``k * 180 / n_orientations`` degrees."""
    if n_orientations < 1:
        raise ConfigError(f"n_orientations must be >= 1 (got {n_orientations})")
    vals = V.V if isinstance(V, EdgeFunction) else np.asarray(V, dtype=np.float64)
    best = np.array(vals, dtype=np.float64, copy=True)
    for k in range(n_orientations):
        fp = line_footprint(line_length, k * 180.0 / n_orientations)
        best = np.maximum(best, close_along(vals, fp))
    out = EdgeFunction.from_values(np.clip(best, 0.0, 1.0))
    if isinstance(V, EdgeFunction):
        out.valid = V.valid.copy()
        out.window = V.window
    return out
