"""Hot-loop dispatch: compiled extension when built, numpy fallback otherwise.

Set ``SHAREREC_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SHAREREC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def jaccard_pairs(indptr, indices, rows, cols, impl=None):
    """Jaccard similarity between the item sets of CSR rows ``rows[k]`` and ``cols[k]``.

    CSR column indices must be sorted within each row.
    """
    return (impl or _impl).jaccard_pairs(_i64(indptr), _i64(indices), _i64(rows), _i64(cols))


def nth_unseen_items(indptr, indices, users, draws, impl=None):
    return (impl or _impl).nth_unseen_items(_i64(indptr), _i64(indices), _i64(users), _i64(draws))


def bpr_batch(P, Q, users, pos, neg, impl=None):
    """Summed BPR loss over triples plus gradients w.r.t. the scored embeddings."""
    return (impl or _impl).bpr_batch(_f64(P), _f64(Q), _i64(users), _i64(pos), _i64(neg))


def positive_nonedge_pairs(C, indptr, indices, impl=None):
    """All (i < j) with C[i, j] > 0 that are not edges of the given CSR adjacency."""
    return (impl or _impl).positive_nonedge_pairs(_f64(C), _i64(indptr), _i64(indices))
