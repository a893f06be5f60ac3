# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics must match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs

cnp.import_array()


def jaccard_pairs(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                  const cnp.int64_t[::1] rows, const cnp.int64_t[::1] cols):
    cdef Py_ssize_t k, npairs = rows.shape[0]
    cdef cnp.int64_t a, a_end, b, b_end, inter, la, lb
    out = np.zeros(npairs, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for k in range(npairs):
            a = indptr[rows[k]]
            a_end = indptr[rows[k] + 1]
            b = indptr[cols[k]]
            b_end = indptr[cols[k] + 1]
            la = a_end - a
            lb = b_end - b
            if la == 0 or lb == 0:
                continue
            inter = 0
            while a < a_end and b < b_end:
                if indices[a] == indices[b]:
                    inter += 1
                    a += 1
                    b += 1
                elif indices[a] < indices[b]:
                    a += 1
                else:
                    b += 1
            res[k] = <double>inter / <double>(la + lb - inter)
    return out


def nth_unseen_items(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                     const cnp.int64_t[::1] users, const cnp.int64_t[::1] draws):
    cdef Py_ssize_t k, n = users.shape[0]
    cdef cnp.int64_t item, p, p_end
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    with nogil:
        for k in range(n):
            item = draws[k]
            p = indptr[users[k]]
            p_end = indptr[users[k] + 1]
            while p < p_end and indices[p] <= item:
                item += 1
                p += 1
            res[k] = item
    return out


def bpr_batch(const double[:, ::1] P, const double[:, ::1] Q,
              const cnp.int64_t[::1] users, const cnp.int64_t[::1] pos,
              const cnp.int64_t[::1] neg):
    cdef Py_ssize_t k, t, n = users.shape[0], d = P.shape[1]
    cdef cnp.int64_t u, v, w
    cdef double x, g, loss = 0.0
    gP_arr = np.zeros((P.shape[0], d), dtype=np.float64)
    gQ_arr = np.zeros((Q.shape[0], d), dtype=np.float64)
    cdef double[:, ::1] gP = gP_arr
    cdef double[:, ::1] gQ = gQ_arr
    with nogil:
        for k in range(n):
            u = users[k]
            v = pos[k]
            w = neg[k]
            x = 0.0
            for t in range(d):
                x = x + P[u, t] * (Q[v, t] - Q[w, t])
            # -log sigmoid(x) = softplus(-x)
            if x >= 0:
                loss += log1p(exp(-x))
                g = -exp(-x) / (1.0 + exp(-x))
            else:
                loss += -x + log1p(exp(x))
                g = -1.0 / (1.0 + exp(x))
            for t in range(d):
                gP[u, t] += g * (Q[v, t] - Q[w, t])
                gQ[v, t] += g * P[u, t]
                gQ[w, t] -= g * P[u, t]
    return loss, gP_arr, gQ_arr


def positive_nonedge_pairs(const double[:, ::1] C, const cnp.int64_t[::1] indptr,
                           const cnp.int64_t[::1] indices):
    cdef Py_ssize_t m = C.shape[0]
    cdef Py_ssize_t i, j, count = 0
    cdef cnp.int64_t p
    marker_arr = np.full(m, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] marker = marker_arr
    with nogil:
        for i in range(m):
            for p in range(indptr[i], indptr[i + 1]):
                marker[indices[p]] = i
            for j in range(i + 1, m):
                if C[i, j] > 0.0 and marker[j] != i:
                    count += 1
    rows_arr = np.empty(count, dtype=np.int64)
    cols_arr = np.empty(count, dtype=np.int64)
    vals_arr = np.empty(count, dtype=np.float64)
    cdef cnp.int64_t[::1] rows = rows_arr
    cdef cnp.int64_t[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    marker_arr.fill(-1)
    count = 0
    with nogil:
        for i in range(m):
            for p in range(indptr[i], indptr[i + 1]):
                marker[indices[p]] = i
            for j in range(i + 1, m):
                if C[i, j] > 0.0 and marker[j] != i:
                    rows[count] = i
                    cols[count] = j
                    vals[count] = C[i, j]
                    count += 1
    return rows_arr, cols_arr, vals_arr
