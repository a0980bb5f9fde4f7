# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Semantics mirror ``textless._kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def dtw_accumulate(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1], i, j
    cdef double[:, ::1] acc = np.empty((n, m), dtype=np.float64)
    cdef long long[:, ::1] length = np.empty((n, m), dtype=np.int64)
    cdef double best
    cdef long long blen
    acc[0, 0] = c[0, 0]
    length[0, 0] = 1
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + c[0, j]
        length[0, j] = length[0, j - 1] + 1
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + c[i, 0]
        length[i, 0] = length[i - 1, 0] + 1
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            blen = length[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
                blen = length[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
                blen = length[i, j - 1]
            acc[i, j] = best + c[i, j]
            length[i, j] = blen + 1
    return acc[n - 1, m - 1] / length[n - 1, m - 1]


def levenshtein(a, b):
    cdef long long[::1] x = np.ascontiguousarray(a, dtype=np.int64)
    cdef long long[::1] y = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], i, j
    if n == 0:
        return m
    if m == 0:
        return n
    cdef long long[::1] prev = np.arange(m + 1, dtype=np.int64)
    cdef long long[::1] cur = np.empty(m + 1, dtype=np.int64)
    cdef long long[::1] tmp
    cdef long long best, cand
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if x[i - 1] == y[j - 1] else 1)
            cand = prev[j] + 1
            if cand < best:
                best = cand
            cand = cur[j - 1] + 1
            if cand < best:
                best = cand
            cur[j] = best
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])


def ar_generate(cond, prev_tables, w_out, b_out, double temperature, uniforms, long start_code):
    cdef double[:, ::1] cv = np.ascontiguousarray(cond, dtype=np.float64)
    cdef double[:, :, ::1] tables = np.ascontiguousarray(prev_tables, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(w_out, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_out, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = cv.shape[0], hdim = cv.shape[1], order = tables.shape[0]
    cdef Py_ssize_t q = w.shape[1], t, j, k, code
    cdef double[::1] h = np.empty(hdim, dtype=np.float64)
    cdef double[::1] logits = np.empty(q, dtype=np.float64)
    cdef long[::1] history = np.full(max(order, 1), start_code, dtype=np.int_)
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef double s, zmax, total, target
    for t in range(n):
        for k in range(hdim):
            s = cv[t, k]
            for j in range(order):
                s += tables[j, history[j], k]
            h[k] = s if s > 0.0 else 0.0
        for j in range(q):
            logits[j] = 0.0
        for k in range(hdim):
            s = h[k]
            if s != 0.0:
                for j in range(q):
                    logits[j] += s * w[k, j]
        code = 0
        for j in range(q):
            logits[j] += b[j]
            if logits[j] > logits[code]:
                code = j
        if temperature > 0.0:
            zmax = logits[code] / temperature
            total = 0.0
            for j in range(q):
                logits[j] = exp(logits[j] / temperature - zmax)
                total += logits[j]
            target = u[t] * total
            s = 0.0
            code = q - 1
            for j in range(q):
                s += logits[j]
                if s > target:
                    code = j
                    break
        out[t] = code
        for j in range(order - 1, 0, -1):
            history[j] = history[j - 1]
        if order > 0:
            history[0] = code
    return out_arr
