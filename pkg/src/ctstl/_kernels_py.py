"""Pure-numpy implementations of the compiled kernels (same API)."""

import numpy as np


def pivot(T: np.ndarray, r: int, q: int) -> None:
    """Gauss-Jordan pivot of ``T`` on entry ``(r, q)``, in place."""
    piv = T[r, q]
    if piv == 0.0:
        raise ZeroDivisionError("zero pivot")
    prow = T[r] / piv
    prow[q] = 1.0
    col = T[:, q].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    if rows.size:
        cols = np.flatnonzero(prow)
        if cols.size * 2 < T.shape[1]:
            T[np.ix_(rows, cols)] -= np.outer(col[rows], prow[cols])
        else:
            T[rows] -= np.outer(col[rows], prow)
        T[rows, q] = 0.0
    T[r] = prow


def window_max(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """``out[i] = max(v[lo[i]:hi[i] + 1])`` via a sparse table."""
    v = np.ascontiguousarray(v, dtype=float)
    lo = np.asarray(lo, dtype=np.intp)
    hi = np.asarray(hi, dtype=np.intp)
    if lo.size == 0:
        return np.empty(0)
    if np.any(lo > hi) or lo.min() < 0 or hi.max() >= v.size:
        raise ValueError("invalid window")
    if np.any(np.diff(lo) < 0) or np.any(np.diff(hi) < 0):
        raise ValueError("window bounds must be nondecreasing")
    levels = [v]
    span = 1
    while 2 * span <= v.size:
        prev = levels[-1]
        levels.append(np.maximum(prev[:-span], prev[span:]))
        span *= 2
    length = hi - lo + 1
    k = np.floor(np.log2(length)).astype(np.intp)
    out = np.empty(lo.size)
    for lev in np.unique(k):
        sel = k == lev
        table = levels[lev]
        out[sel] = np.maximum(table[lo[sel]], table[hi[sel] - (1 << lev) + 1])
    return out
