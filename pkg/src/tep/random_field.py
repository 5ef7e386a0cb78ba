"""Stationary isotropic Gaussian random fields and patch-response statistics.

Fields carry the squared-exponential covariance
``cov(z, z') = sigma**2 * exp(-|z - z'|**2 / (2 * ell**2))``.  Closed-form
moments of the patch response live next to Monte-Carlo estimators that
sample the same quantities directly, so each can be checked against the
other.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.ndimage import uniform_filter

from .errors import ConfigError, NumericalError
from .image_core import ImageGrid, PatchVector

logger = logging.getLogger(__name__)

EXACT_CAP = 128 * 128
JITTER = 1e-10
MIN_OBSERVERS = 100
CHUNK = 2000


@dataclass(frozen=True)
class FieldSpec:
    mu: float = 0.0
    sigma: float = 1.0
    ell: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigError(f"sigma must be >= 0 (got {self.sigma})")
        if not self.ell > 0:
            raise ConfigError(f"ell must be > 0 (got {self.ell})")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must fit in 64 bits (got {self.seed})")


@dataclass(frozen=True)
class ResponseDistribution:
    samples: np.ndarray = field(repr=False)
    r: int
    tau: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.size == 0 or not np.all(np.isfinite(s)):
            raise NumericalError("response distribution needs finite, non-empty samples")
        object.__setattr__(self, "samples", s)

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def variance(self) -> float:
        return float(self.samples.var())


@dataclass(frozen=True)
class ScanRow:
    r: int
    mean: float
    variance: float
    n_observers: int


@dataclass(frozen=True)
class Estimate:
    """Monte-Carlo value with its standard error."""

    value: float
    stderr: float
    n: int

    def z_score(self, reference: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.value == reference else np.inf
        return abs(self.value - reference) / self.stderr


# ------------------------------------------------------------------ sampling

def se_kernel(dist2: np.ndarray, spec: FieldSpec) -> np.ndarray:
    return spec.sigma ** 2 * np.exp(-np.asarray(dist2, dtype=np.float64) / (2.0 * spec.ell ** 2))


def _axis_factor(n: int, ell: float) -> np.ndarray:
    """Cholesky factor of the unit-variance 1D kernel on ``n`` points."""
    k = np.arange(n, dtype=np.float64)
    K = np.exp(-(k[:, None] - k[None, :]) ** 2 / (2.0 * ell ** 2))
    K[np.diag_indices(n)] += JITTER
    try:
        return linalg.cholesky(K, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"covariance not positive definite after jitter (ell={ell}, n={n})") from exc


def _sample_exact(spec, height, width, n, rng):
    # the kernel factorizes over rows and columns, so Sigma = Kr (x) Kc
    Lr = _axis_factor(height, spec.ell)
    Lc = _axis_factor(width, spec.ell)
    Z = rng.standard_normal((n, height, width))
    return spec.mu + spec.sigma * (Lr @ Z @ Lc.T)


def _sample_circulant(spec, height, width, n, rng):
    H, W = 2 * height, 2 * width
    di = np.minimum(np.arange(H), H - np.arange(H)).astype(np.float64)
    dj = np.minimum(np.arange(W), W - np.arange(W)).astype(np.float64)
    base = np.exp(-(di[:, None] ** 2 + dj[None, :] ** 2) / (2.0 * spec.ell ** 2))
    lam = np.real(np.fft.fft2(base))
    if lam.min() < -1e-8 * lam.max():
        logger.warning("circulant embedding has negative eigenvalues (min %.3g); clipping", lam.min())
    lam = np.sqrt(np.clip(lam, 0.0, None) / (H * W))
    out = np.empty((n, height, width))
    for k in range(n):
        xi = rng.standard_normal((H, W)) + 1j * rng.standard_normal((H, W))
        out[k] = np.real(np.fft.fft2(lam * xi))[:height, :width]
    return spec.mu + spec.sigma * out


def sample_fields(spec: FieldSpec, height: int, width: int, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` independent realizations as an ``(n, height, width)`` array."""
    if height <= 0 or width <= 0:
        raise ConfigError(f"field size must be positive (got {width}x{height})")
    if spec.sigma == 0:
        return np.full((n, height, width), float(spec.mu))
    if height * width <= EXACT_CAP:
        return _sample_exact(spec, height, width, n, rng)
    return _sample_circulant(spec, height, width, n, rng)


def synthesize_field(spec: FieldSpec, width: int, height: int) -> ImageGrid:
    rng = np.random.default_rng(spec.seed)
    return ImageGrid(sample_fields(spec, height, width, 1, rng)[0])


def _chunked(total: int, seed: int, fn, workers: int = 1):
    """Apply ``fn(n, rng)`` over fixed-size chunks with spawned seeds; concatenate results."""
    sizes = [CHUNK] * (total // CHUNK) + ([total % CHUNK] if total % CHUNK else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(n, np.random.default_rng(s)) for n, s in zip(sizes, seeds)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    return np.concatenate(parts)


# ---------------------------------------------------------- patch geometry

def patch_offsets(r: int) -> np.ndarray:
    """``(d, 2)`` pixel offsets of a patch in column-major order."""
    a = np.arange(-r, r + 1)
    rows, cols = np.meshgrid(a, a, indexing="xy")
    # with "xy" indexing the row offset varies fastest after ravel
    return np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)


def patch_covariance(spec: FieldSpec, r: int, shift=(0.0, 0.0)) -> np.ndarray:
    """Cross-covariance between the patch at the origin and the patch at ``shift``."""
    off = patch_offsets(r)
    diff = off[:, None, :] - (off[None, :, :] + np.asarray(shift, dtype=np.float64))
    return se_kernel(np.sum(diff * diff, axis=2), spec)


def _separation_shift(tau: float) -> tuple[float, float]:
    return 0.0, float(tau)


def _check_separation(r: int, tau: float) -> None:
    if not tau > 2.0 * np.sqrt(2.0) * r:
        raise ConfigError(f"tau must exceed 2*sqrt(2)*r = {2 * np.sqrt(2) * r:.4g} (got {tau})")


# ------------------------------------------------------------ closed forms

def expected_response_same(spec: FieldSpec, tau: float) -> float:
    if tau < 0:
        raise ConfigError(f"tau must be >= 0 (got {tau})")
    return 2.0 * spec.sigma ** 2 * (1.0 - np.exp(-tau ** 2 / (2.0 * spec.ell ** 2)))


def expected_response_cross(p: FieldSpec, q: FieldSpec) -> float:
    return (p.mu - q.mu) ** 2 + p.sigma ** 2 + q.sigma ** 2


def response_difference(p: FieldSpec, q: FieldSpec, tau: float) -> float:
    if tau < 0:
        raise ConfigError(f"tau must be >= 0 (got {tau})")
    return abs((p.mu - q.mu) ** 2 + (p.sigma ** 2 - q.sigma ** 2)
               - 2.0 * p.sigma ** 2 * np.exp(-tau ** 2 / (2.0 * p.ell ** 2)))


def _factor(S: np.ndarray, spec: FieldSpec):
    """Cholesky of ``S`` with diagonal jitter proportional to ``sigma**2``."""
    S = S + JITTER * spec.sigma ** 2 * np.eye(S.shape[0])
    try:
        return linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("patch covariance is singular even after jitter") from exc


def conditional_moments(spec: FieldSpec, v: np.ndarray, r: int, tau: float):
    """Mean and covariance of the patch at distance ``tau`` given the observer patch ``v``."""
    d = (2 * r + 1) ** 2
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (d,):
        raise ValueError(f"observer patch must have {d} entries, got {v.shape}")
    mu = np.full(d, float(spec.mu))
    if spec.sigma == 0:
        return mu, np.zeros((d, d))
    Sp = patch_covariance(spec, r)
    Sc = patch_covariance(spec, r, _separation_shift(tau))
    fac = _factor(Sp, spec)
    mean = mu + Sc.T @ linalg.cho_solve(fac, v - mu)
    cov = Sp - Sc.T @ linalg.cho_solve(fac, Sc)
    return mean, 0.5 * (cov + cov.T)


def response_variance_conditional(spec: FieldSpec, observer_patch: PatchVector | np.ndarray,
                                  tau: float, r: int, exact_mean: bool = False) -> float:
    """Variance of the patch response given the observer patch.

    By default the quadratic term uses ``mu - v`` as in the generalized
    chi-squared argument; ``exact_mean=True`` uses the full conditional
    mean ``E[P(y) | v] - v`` instead.  The two agree as the patches
    decorrelate.
    """
    _check_separation(r, tau)
    v = observer_patch.values if isinstance(observer_patch, PatchVector) else observer_patch
    if isinstance(observer_patch, PatchVector) and observer_patch.half_width != r:
        raise ValueError("observer patch half-width does not match r")
    d = (2 * r + 1) ** 2
    mean, cov = conditional_moments(spec, v, r, tau)
    m = (mean - v) if exact_mean else (np.full(d, float(spec.mu)) - np.asarray(v))
    return float(2.0 / d ** 2 * (np.sum(cov * cov) + 2.0 * m @ cov @ m))


def covariance_frobenius_bound(spec: FieldSpec, r: int, tau: float) -> tuple[float, float]:
    """Exact Frobenius norm of the cross-covariance and its distance-based upper bound."""
    if r > 0:
        _check_separation(r, tau)
    exact = float(np.linalg.norm(patch_covariance(spec, r, _separation_shift(tau)), "fro"))
    gap = tau - 2.0 * np.sqrt(2.0) * r
    bound = spec.sigma ** 2 * (2 * r + 1) ** 2 * np.exp(-gap ** 2 / (2.0 * spec.ell ** 2))
    return exact, float(bound)


# ------------------------------------------------------------- Monte Carlo

def mc_response_mean(spec: FieldSpec, r: int, tau: int, n: int = 10_000,
                     workers: int = 1) -> Estimate:
    """Mean of the response between two patches ``tau`` columns apart on sampled fields."""
    tau = int(tau)
    if tau < 0:
        raise ConfigError(f"tau must be >= 0 (got {tau})")
    h, w = 2 * r + 1, tau + 2 * r + 1

    def draw(k, rng):
        strips = sample_fields(spec, h, w, k, rng)
        diff = strips[:, :, tau:] - strips[:, :, :2 * r + 1]
        return np.mean(diff * diff, axis=(1, 2))

    vals = _chunked(n, spec.seed, draw, workers)
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n)), n)


def _joint_factor(spec: FieldSpec, r: int, tau: float):
    d = (2 * r + 1) ** 2
    Sp = patch_covariance(spec, r)
    Sc = patch_covariance(spec, r, _separation_shift(tau))
    J = np.block([[Sp, Sc], [Sc.T, Sp]]) + JITTER * spec.sigma ** 2 * np.eye(2 * d)
    try:
        L = linalg.cholesky(J, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("joint patch covariance is singular even after jitter") from exc
    return L[:d, :d], L[d:, :d], L[d:, d:]


def _conditional_draws(spec, v, r, tau):
    """Sampler of the second patch with the first pinned to ``v`` via the joint factor."""
    L11, L21, L22 = _joint_factor(spec, r, tau)
    d = L11.shape[0]
    z1 = linalg.solve_triangular(L11, np.asarray(v, dtype=np.float64) - spec.mu, lower=True)
    center = spec.mu + L21 @ z1

    def draw(k, rng):
        return center[None, :] + rng.standard_normal((k, d)) @ L22.T

    return draw


def mc_conditional_mean(spec: FieldSpec, v: np.ndarray, r: int, tau: float,
                        n: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry sample mean and standard error of the conditioned patch."""
    draws = _chunked(n, spec.seed, _conditional_draws(spec, v, r, tau))
    return draws.mean(axis=0), draws.std(axis=0, ddof=1) / np.sqrt(n)


def mc_conditional_variance(spec: FieldSpec, v: np.ndarray, r: int, tau: float,
                            n: int = 100_000, workers: int = 1) -> Estimate:
    """Sample variance of the response given the observer patch, with its standard error."""
    sampler = _conditional_draws(spec, v, r, tau)
    v = np.asarray(v, dtype=np.float64)

    def draw(k, rng):
        y = sampler(k, rng)
        return np.mean((y - v[None, :]) ** 2, axis=1)

    resp = _chunked(n, spec.seed, draw, workers)
    dev = resp - resp.mean()
    s2 = float(np.mean(dev ** 2))
    m4 = float(np.mean(dev ** 4))
    return Estimate(s2 * n / (n - 1), float(np.sqrt(max(m4 - s2 * s2, 0.0) / n)), n)


# --------------------------------------------------------------- Hellinger

def annulus_offsets(tau: float) -> np.ndarray:
    """Integer offsets whose Euclidean length lies within ``tau +- 0.5``."""
    reach = int(np.floor(tau + 0.5))
    a = np.arange(-reach, reach + 1)
    oi, oj = np.meshgrid(a, a, indexing="ij")
    keep = np.abs(np.hypot(oi, oj) - tau) <= 0.5
    return np.stack([oi[keep], oj[keep]], axis=1)


def response_distribution(p: FieldSpec, q: FieldSpec | None, r: int, tau: float,
                          n_samples: int, seed: int | None = None) -> ResponseDistribution:
    """Annulus-averaged response of an observer patch drawn from ``p``.

    Neighbour patches come from the same realization of ``p`` when ``q``
    is None, otherwise from an independent realization of ``q``.
    """
    offsets = annulus_offsets(tau)
    if offsets.size == 0:
        raise ConfigError(f"no lattice offsets at distance {tau} +- 0.5")
    reach = int(np.abs(offsets).max())
    size = 2 * (reach + r) + 1
    c = reach + r
    seed = p.seed if seed is None else seed

    def draw(k, rng):
        P = sample_fields(p, size, size, k, rng)
        Y = P if q is None else sample_fields(q, size, size, k, rng)
        x = P[:, c - r:c + r + 1, c - r:c + r + 1]
        acc = np.zeros(k)
        for oi, oj in offsets:
            y = Y[:, c + oi - r:c + oi + r + 1, c + oj - r:c + oj + r + 1]
            acc += np.mean((y - x) ** 2, axis=(1, 2))
        return acc / len(offsets)

    return ResponseDistribution(_chunked(int(n_samples), seed, draw), r=r, tau=tau)


def hellinger_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Hellinger distance of two samples on shared Freedman-Diaconis bins."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    edges = np.histogram_bin_edges(np.concatenate([a, b]), bins="fd")
    pa = np.histogram(a, bins=edges)[0] / a.size
    pb = np.histogram(b, bins=edges)[0] / b.size
    return float(np.clip(1.0 - np.sum(np.sqrt(pa * pb)), 0.0, 1.0))


def hellinger_separation(p: FieldSpec, q: FieldSpec, r: int, tau: float = 12.0,
                         n_samples: int = 2000) -> float:
    """Separation between same-texture and cross-texture responses seen from ``p``."""
    if n_samples < 1000:
        raise ConfigError(f"n_samples must be >= 1000 (got {n_samples})")
    same = response_distribution(p, None, r, tau, n_samples, seed=p.seed)
    cross = response_distribution(p, q, r, tau, n_samples, seed=p.seed + 1)
    return hellinger_distance(same.samples, cross.samples)


# ------------------------------------------------------- periodicity scan

def annulus_responses(img: ImageGrid, r: int, tau: float) -> np.ndarray:
    """Annulus-averaged response at every observer whose footprint fits."""
    U = img.data
    offsets = annulus_offsets(tau)
    reach = int(np.abs(offsets).max())
    m = reach + r
    h, w = U.shape
    if h <= 2 * m or w <= 2 * m:
        return np.empty(0)
    acc = np.zeros((h - 2 * m, w - 2 * m))
    box = 2 * r + 1
    for oi, oj in offsets:
        # squared difference at base pixels that are at most r away from an observer
        base = U[reach:h - reach, reach:w - reach]
        moved = U[reach + oi:h - reach + oi, reach + oj:w - reach + oj]
        D = (moved - base) ** 2
        acc += uniform_filter(D, size=box, mode="constant")[r:D.shape[0] - r, r:D.shape[1] - r]
    return acc.ravel() / len(offsets)


def scan_patch_width(img: ImageGrid, r_list, tau: float) -> list[ScanRow]:
    rows = []
    for r in r_list:
        if r < 0:
            raise ConfigError(f"patch half-width must be >= 0 (got {r})")
        vals = annulus_responses(img, int(r), tau)
        if vals.size < MIN_OBSERVERS:
            raise ConfigError(f"only {vals.size} valid observers for r={r}, tau={tau}; "
                              f"need at least {MIN_OBSERVERS}")
        rows.append(ScanRow(int(r), float(vals.mean()), float(vals.var()), int(vals.size)))
    return rows


def format_table(header, rows) -> str:
    """Tab-separated text with one header line."""
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(f"{x:.10g}" if isinstance(x, float) else str(x) for x in row))
    return "\n".join(lines) + "\n"
