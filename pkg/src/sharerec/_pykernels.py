"""Pure numpy implementations of the hot loops, used when the extension is absent."""

import numpy as np
import scipy.sparse as sp


def _csr(indptr, indices, nrows):
    ncols = int(indices.max()) + 1 if len(indices) else 1
    data = np.ones(len(indices), dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(nrows, ncols))


def jaccard_pairs(indptr, indices, rows, cols):
    """Jaccard ratio of the sorted index sets of row pairs; 0 when either set is empty."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if len(rows) == 0:
        return np.zeros(0, dtype=np.float64)
    deg = np.diff(indptr)
    mat = _csr(indptr, indices, len(deg))
    inter = np.asarray(mat[rows].multiply(mat[cols]).sum(axis=1)).ravel()
    union = deg[rows] + deg[cols] - inter
    out = np.zeros(len(rows), dtype=np.float64)
    ok = (deg[rows] > 0) & (deg[cols] > 0)
    out[ok] = inter[ok] / union[ok]
    return out


def nth_unseen_items(indptr, indices, users, draws):
    """Map each draw r to the r-th item (0-based) absent from the user's sorted item list."""
    out = np.empty(len(users), dtype=np.int64)
    for k, (u, r) in enumerate(zip(users, draws)):
        item = int(r)
        for seen in indices[indptr[u]:indptr[u + 1]]:
            if seen > item:
                break
            item += 1
        out[k] = item
    return out


def bpr_batch(P, Q, users, pos, neg):
    diff = Q[pos] - Q[neg]
    x = np.einsum("ij,ij->i", P[users], diff)
    loss = float(np.sum(np.logaddexp(0.0, -x)))
    g = -np.exp(-np.logaddexp(0.0, x))  # -sigmoid(-x)
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    np.add.at(gP, users, g[:, None] * diff)
    np.add.at(gQ, pos, g[:, None] * P[users])
    np.add.at(gQ, neg, -g[:, None] * P[users])
    return loss, gP, gQ


def positive_nonedge_pairs(C, indptr, indices):
    m = C.shape[0]
    mask = np.triu(C > 0.0, k=1)
    deg = np.diff(indptr)
    src = np.repeat(np.arange(m), deg)
    mask[src, indices] = False
    rows, cols = np.nonzero(mask)
    return rows.astype(np.int64), cols.astype(np.int64), C[rows, cols].astype(np.float64)
