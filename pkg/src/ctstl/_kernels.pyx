# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: simplex tableau pivot and sliding-window maxima."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t q):
    """Gauss-Jordan pivot of ``T`` on entry ``(r, q)``, in place.

    Only the nonzero entries of the pivot row are touched in each
    eliminated row, and rows with a zero in column ``q`` are skipped.
    """
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t n = T.shape[1]
    cdef Py_ssize_t i, k, c, nnz = 0
    cdef double piv = T[r, q]
    cdef double f
    cdef cnp.intp_t[::1] idx = np.empty(n, dtype=np.intp)
    if piv == 0.0:
        raise ZeroDivisionError("zero pivot")
    with nogil:
        for k in range(n):
            if T[r, k] != 0.0:
                T[r, k] = T[r, k] / piv
                idx[nnz] = k
                nnz += 1
        T[r, q] = 1.0
        for i in range(m):
            if i == r:
                continue
            f = T[i, q]
            if f != 0.0:
                for k in range(nnz):
                    c = idx[k]
                    T[i, c] -= f * T[r, c]
                T[i, q] = 0.0


def window_max(double[::1] v, cnp.intp_t[::1] lo, cnp.intp_t[::1] hi):
    """``out[i] = max(v[lo[i]:hi[i] + 1])`` for nondecreasing ``lo`` and ``hi``.

    Monotone-deque sweep, O(len(v) + len(lo)).
    """
    cdef Py_ssize_t nq = lo.shape[0]
    cdef Py_ssize_t nv = v.shape[0]
    cdef double[::1] out = np.empty(nq)
    cdef cnp.intp_t[::1] dq = np.empty(nv + 1, dtype=np.intp)
    cdef Py_ssize_t head = 0, tail = 0, nxt = 0, i
    for i in range(nq):
        if lo[i] > hi[i] or lo[i] < 0 or hi[i] >= nv:
            raise ValueError("invalid window")
        if i > 0 and (lo[i] < lo[i - 1] or hi[i] < hi[i - 1]):
            raise ValueError("window bounds must be nondecreasing")
    with nogil:
        for i in range(nq):
            while nxt <= hi[i]:
                while tail > head and v[dq[tail - 1]] <= v[nxt]:
                    tail -= 1
                dq[tail] = nxt
                tail += 1
                nxt += 1
            while dq[head] < lo[i]:
                head += 1
            out[i] = v[dq[head]]
    return np.asarray(out)
