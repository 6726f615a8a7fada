# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contracts as ``_pykernels``; results are bitwise equal."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef double _select(double[::1] a, Py_ssize_t k) noexcept nogil:
    # in-place quickselect: value that would sit at position k after sorting
    cdef Py_ssize_t lo = 0, hi = a.shape[0] - 1, i, j, mid
    cdef double pivot, tmp
    while lo < hi:
        mid = lo + (hi - lo) // 2
        # median of three into a[mid]
        if a[mid] < a[lo]:
            tmp = a[mid]; a[mid] = a[lo]; a[lo] = tmp
        if a[hi] < a[lo]:
            tmp = a[hi]; a[hi] = a[lo]; a[lo] = tmp
        if a[hi] < a[mid]:
            tmp = a[hi]; a[hi] = a[mid]; a[mid] = tmp
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                tmp = a[i]; a[i] = a[j]; a[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return a[k]


def topk_indices(z, Py_ssize_t keep):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], i, n_above = 0, n_ties, pos = 0
    if keep >= n:
        return np.arange(n, dtype=np.int64)
    if keep <= 0:
        return np.empty(0, dtype=np.int64)
    cdef double[::1] work = np.array(zv, copy=True)
    cdef double thresh
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(keep, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    with nogil:
        thresh = _select(work, n - keep)
        for i in range(n):
            if zv[i] > thresh:
                n_above += 1
        n_ties = keep - n_above
        for i in range(n):
            if zv[i] > thresh:
                ov[pos] = i
                pos += 1
            elif zv[i] == thresh and n_ties > 0:
                ov[pos] = i
                pos += 1
                n_ties -= 1
    return out


def zero_at(v, idx):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.array(v, dtype=np.float64, copy=True)
    cdef const cnp.int64_t[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(iv.shape[0]):
        ov[iv[i]] = 0.0
    return out


def split_by_mask(v, idx):
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const cnp.int64_t[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t m = iv.shape[0], i, pos = 0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] residual = np.array(vv, copy=True)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] gi = np.empty(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gv = np.empty(m, dtype=np.float64)
    cdef double[::1] rv = residual
    cdef cnp.int64_t[::1] giv = gi
    cdef double[::1] gvv = gv
    cdef double x
    with nogil:
        for i in range(m):
            x = vv[iv[i]]
            if x != 0.0:
                giv[pos] = iv[i]
                gvv[pos] = x
                pos += 1
            rv[iv[i]] = 0.0
    return gi[:pos].copy(), gv[:pos].copy(), residual


def sparse_sum(idx_list, val_list, Py_ssize_t dim, double scale):
    cdef double[::1] acc = np.zeros(dim, dtype=np.float64)
    cdef unsigned char[::1] touched = np.zeros(dim, dtype=np.uint8)
    cdef const cnp.int64_t[::1] iv
    cdef const double[::1] vv
    cdef Py_ssize_t i, j, n_out = 0, pos = 0
    cdef double x
    for idx, vals in zip(idx_list, val_list):
        iv = np.ascontiguousarray(idx, dtype=np.int64)
        vv = np.ascontiguousarray(vals, dtype=np.float64)
        with nogil:
            for i in range(iv.shape[0]):
                j = iv[i]
                acc[j] = acc[j] + vv[i]
                touched[j] = 1
    with nogil:
        for j in range(dim):
            if touched[j] and acc[j] * scale != 0.0:
                n_out += 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] oi = np.empty(n_out, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ov = np.empty(n_out, dtype=np.float64)
    cdef cnp.int64_t[::1] oiv = oi
    cdef double[::1] ovv = ov
    with nogil:
        for j in range(dim):
            if touched[j]:
                x = acc[j] * scale
                if x != 0.0:
                    oiv[pos] = j
                    ovv[pos] = x
                    pos += 1
    return oi, ov


cdef Py_ssize_t _intersect_count(const cnp.int64_t[::1] a, const cnp.int64_t[::1] b) noexcept nogil:
    cdef Py_ssize_t i = 0, j = 0, c = 0
    while i < a.shape[0] and j < b.shape[0]:
        if a[i] == b[j]:
            c += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return c


def mean_pairwise_jaccard(idx_list):
    cdef Py_ssize_t k = len(idx_list), i, j, inter, union
    if k < 2:
        return 1.0
    arrays = [np.ascontiguousarray(a, dtype=np.int64) for a in idx_list]
    cdef const cnp.int64_t[::1] a, b
    cdef double total = 0.0
    for i in range(k):
        a = arrays[i]
        for j in range(i + 1, k):
            b = arrays[j]
            inter = _intersect_count(a, b)
            union = a.shape[0] + b.shape[0] - inter
            if union == 0:
                total += 1.0
            else:
                total += <double>inter / <double>union
    return total / <double>(k * (k - 1) // 2)
