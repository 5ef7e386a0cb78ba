"""Compiled per-window kernels shared by the public API and the observer loop.

All kernels release the GIL so observer rows can be split across threads.
Windows are square ``(2R+1, 2R+1)`` arrays indexed by offset ``o + R``.
"""

import numpy as np
from numba import njit

MAX_SWEEPS = 50


@njit(cache=True, nogil=True)
def response_window(U, row, col, r, R, out):
    d = (2 * r + 1) * (2 * r + 1)
    for i in range(-R, R + 1):
        for j in range(-R, R + 1):
            s = 0.0
            for b in range(-r, r + 1):
                for a in range(-r, r + 1):
                    diff = U[row + i + a, col + j + b] - U[row + a, col + b]
                    s += diff * diff
            out[i + R, j + R] = s / d


@njit(cache=True, nogil=True)
def repair_window(resp, R, delta):
    n = 2 * R + 1
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(n):
            if max(abs(i - R), abs(j - R)) > delta:
                total += resp[i, j]
                count += 1
    mean = total / count
    for i in range(R - delta, R + delta + 1):
        for j in range(R - delta, R + delta + 1):
            resp[i, j] = mean


@njit(cache=True, nogil=True)
def _otsu_labels(vals, labels):
    """Exact two-class Otsu split over the sorted values; False if no split exists."""
    flat = vals.ravel()
    n = flat.size
    order = np.argsort(flat, kind="mergesort")
    srt = flat[order]
    total = 0.0
    for k in range(n):
        total += srt[k]
    best = np.inf
    best_k = -1
    s1 = 0.0
    for k in range(1, n):
        s1 += srt[k - 1]
        if srt[k] <= srt[k - 1]:
            continue
        # between-class scatter is maximal where this quantity is minimal
        s2 = total - s1
        score = -(s1 * s1 / k + s2 * s2 / (n - k))
        if score < best:
            best = score
            best_k = k
    if best_k < 0:
        return False
    thresh = srt[best_k - 1]
    lab = labels.ravel()
    for k in range(n):
        lab[k] = 1 if flat[k] > thresh else 0
    return True


@njit(cache=True, nogil=True)
def boundary_length(labels):
    h, w = labels.shape
    L = 0
    for i in range(h):
        for j in range(w):
            if j + 1 < w and labels[i, j] != labels[i, j + 1]:
                L += 1
            if i + 1 < h and labels[i, j] != labels[i + 1, j]:
                L += 1
    return L


@njit(cache=True, nogil=True)
def energy_k2(vals, labels, lam):
    """Two-pass evaluation of the scale-regularized two-phase energy."""
    h, w = vals.shape
    A0 = 0
    A1 = 0
    S0 = 0.0
    S1 = 0.0
    for i in range(h):
        for j in range(w):
            if labels[i, j] == 0:
                A0 += 1
                S0 += vals[i, j]
            else:
                A1 += 1
                S1 += vals[i, j]
    if A0 == 0 or A1 == 0:
        return np.inf
    c0 = S0 / A0
    c1 = S1 / A1
    fid = 0.0
    for i in range(h):
        for j in range(w):
            if labels[i, j] == 0:
                e = vals[i, j] - c0
            else:
                e = vals[i, j] - c1
            fid += e * e
    L = boundary_length(labels)
    return lam * L * L * (1.0 / A0 + 1.0 / A1) + fid


@njit(cache=True, nogil=True)
def energy_k1(vals):
    h, w = vals.shape
    s = 0.0
    for i in range(h):
        for j in range(w):
            s += vals[i, j]
    mean = s / (h * w)
    e = 0.0
    for i in range(h):
        for j in range(w):
            d = vals[i, j] - mean
            e += d * d
    return e


@njit(cache=True, nogil=True)
def _threshold_step(vals, labels, trial):
    """Assign every pixel to the nearer current phase mean; False if degenerate."""
    h, w = vals.shape
    A0 = 0
    A1 = 0
    S0 = 0.0
    S1 = 0.0
    for i in range(h):
        for j in range(w):
            if labels[i, j] == 0:
                A0 += 1
                S0 += vals[i, j]
            else:
                A1 += 1
                S1 += vals[i, j]
    c0 = S0 / A0
    c1 = S1 / A1
    n0 = 0
    for i in range(h):
        for j in range(w):
            v = vals[i, j]
            if abs(v - c1) < abs(v - c0):
                trial[i, j] = 1
            else:
                trial[i, j] = 0
                n0 += 1
    return 0 < n0 < h * w


@njit(cache=True, nogil=True)
def _icm_pass(vals, labels, lam, shift):
    """One raster sweep of single-pixel flips that strictly lower the exact energy."""
    h, w = vals.shape
    A = np.zeros(2)
    S = np.zeros(2)
    Q = np.zeros(2)
    for i in range(h):
        for j in range(w):
            k = labels[i, j]
            v = vals[i, j] - shift
            A[k] += 1.0
            S[k] += v
            Q[k] += v * v
    L = float(boundary_length(labels))
    E = lam * L * L * (1.0 / A[0] + 1.0 / A[1]) \
        + (Q[0] - S[0] * S[0] / A[0]) + (Q[1] - S[1] * S[1] / A[1])
    flips = 0
    for i in range(h):
        for j in range(w):
            a = labels[i, j]
            b = 1 - a
            same = 0
            other = 0
            if i > 0:
                if labels[i - 1, j] == a:
                    same += 1
                else:
                    other += 1
            if i + 1 < h:
                if labels[i + 1, j] == a:
                    same += 1
                else:
                    other += 1
            if j > 0:
                if labels[i, j - 1] == a:
                    same += 1
                else:
                    other += 1
            if j + 1 < w:
                if labels[i, j + 1] == a:
                    same += 1
                else:
                    other += 1
            if other == 0 or A[a] <= 1.0:
                continue
            v = vals[i, j] - shift
            Aa = A[a] - 1.0
            Ab = A[b] + 1.0
            Sa = S[a] - v
            Sb = S[b] + v
            Qa = Q[a] - v * v
            Qb = Q[b] + v * v
            Ln = L + same - other
            En = lam * Ln * Ln * (1.0 / Aa + 1.0 / Ab) \
                + (Qa - Sa * Sa / Aa) + (Qb - Sb * Sb / Ab)
            if En < E - 1e-12 * abs(E):
                labels[i, j] = b
                A[a] = Aa
                A[b] = Ab
                S[a] = Sa
                S[b] = Sb
                Q[a] = Qa
                Q[b] = Qb
                L = Ln
                E = En
                flips += 1
    return flips


@njit(cache=True, nogil=True)
def segment_window(vals, lam, labels, trial, history):
    """Best of one phase and a locally optimal two-phase labeling.

    Writes the two-phase labeling into ``labels`` (all zero when one phase
    wins).  Returns ``(K, E1, E2, n_history)``; ``history`` receives the
    two-phase energy after initialization and after each sweep.
    """
    E1 = energy_k1(vals)
    n_hist = 0
    if not _otsu_labels(vals, labels):
        labels[:, :] = 0
        return 1, E1, np.inf, n_hist
    h, w = vals.shape
    s = 0.0
    for i in range(h):
        for j in range(w):
            s += vals[i, j]
    shift = s / (h * w)
    E = energy_k2(vals, labels, lam)
    history[n_hist] = E
    n_hist += 1
    for _ in range(MAX_SWEEPS):
        changed = False
        if _threshold_step(vals, labels, trial):
            Et = energy_k2(vals, trial, lam)
            if Et < E - 1e-12 * abs(E):
                labels[:, :] = trial
                E = Et
                changed = True
        if _icm_pass(vals, labels, lam, shift) > 0:
            changed = True
        E = energy_k2(vals, labels, lam)
        history[n_hist] = E
        n_hist += 1
        if not changed:
            break
    if E < E1 - 1e-12:
        return 2, E1, E, n_hist
    labels[:, :] = 0
    return 1, E1, E, n_hist


@njit(cache=True, nogil=True)
def edge_mask(labels, mask):
    h, w = labels.shape
    for i in range(h):
        for j in range(w):
            m = 0
            if j + 1 < w and labels[i, j] != labels[i, j + 1]:
                m = 1
            if i + 1 < h and labels[i, j] != labels[i + 1, j]:
                m = 1
            mask[i, j] = m


@njit(cache=True, nogil=True)
def clip_mask(mask, R, r):
    n = 2 * R + 1
    for i in range(n):
        for j in range(n):
            if R - max(abs(i - R), abs(j - R)) <= r:
                mask[i, j] = 0


@njit(cache=True, nogil=True)
def detect_rows(U, rows, col_lo, col_hi, r, R, delta, scale, lam, hits, votes):
    """Run every observer in ``rows`` x ``[col_lo, col_hi)`` into private accumulators."""
    n = 2 * R + 1
    resp = np.empty((n, n))
    labels = np.zeros((n, n), dtype=np.int8)
    trial = np.zeros((n, n), dtype=np.int8)
    mask = np.zeros((n, n), dtype=np.int8)
    history = np.empty(MAX_SWEEPS + 2)
    reach = R - r - 1
    for row in rows:
        for col in range(col_lo, col_hi):
            response_window(U, row, col, r, R, resp)
            repair_window(resp, R, delta)
            if scale != 1.0:
                for i in range(n):
                    for j in range(n):
                        resp[i, j] *= scale
            K, _, _, _ = segment_window(resp, lam, labels, trial, history)
            if K == 2:
                edge_mask(labels, mask)
                for i in range(R - reach, R + reach + 1):
                    for j in range(R - reach, R + reach + 1):
                        hits[row - R + i, col - R + j] += mask[i, j]
            for i in range(row - reach, row + reach + 1):
                for j in range(col - reach, col + reach + 1):
                    votes[i, j] += 1
