"""Homophilic relation augmentation: homophily-thresholded positives and InfoNCE on user codes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import SocialGraph
from .homophily import HomophilyTable
from .rewire import _unit_rows


@dataclass
class PositiveSampleSets:
    positives: list[np.ndarray]
    epsilon: float
    zeta: float
    matrix: sp.csr_matrix

    @property
    def anchors(self) -> np.ndarray:
        return np.flatnonzero(np.diff(self.matrix.indptr) > 0)


def homophily_threshold(h_min: float, h_max: float, zeta: float) -> float:
    return h_min + zeta * (h_max - h_min)


def select_positives(table: HomophilyTable, S_original: SocialGraph, zeta: float) -> PositiveSampleSets:
    """Original-graph neighbours whose edge homophily strictly exceeds the scaled threshold."""
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"zeta must lie in [0, 1], got {zeta}")
    m = S_original.num_users
    eps = homophily_threshold(table.h_min, table.h_max, zeta)
    keep = table.ratios > eps
    r, c = table.rows[keep], table.cols[keep]
    mat = sp.csr_matrix((np.ones(2 * len(r)), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(m, m))
    mat.sort_indices()
    pos = [mat.indices[mat.indptr[u]:mat.indptr[u + 1]].copy() for u in range(m)]
    return PositiveSampleSets(pos, eps, zeta, mat)


def infonce_loss(Z: np.ndarray, positives: PositiveSampleSets, tau: float = 0.1,
                 anchors=None, negative_pool=None) -> tuple[float, np.ndarray]:
    """Summed InfoNCE over anchors and its gradient w.r.t. Z.

    For anchor u with positives P_u the term is
    ``-log(sum_P e^{c/tau} / (sum_P e^{c/tau} + sum_N e^{c/tau}))`` with c the
    cosine similarity. Negatives N are ``negative_pool`` (all users when None)
    minus P_u and u itself. Anchors without positives contribute nothing.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    m = Z.shape[0]
    if anchors is None:
        anchors = positives.anchors
    else:
        anchors = np.unique(np.asarray(anchors, dtype=np.int64))
        anchors = anchors[np.diff(positives.matrix.indptr)[anchors] > 0]
    gZ = np.zeros_like(Z)
    if len(anchors) == 0:
        return 0.0, gZ

    if negative_pool is None:
        cols = np.arange(m)
    else:
        # candidates: the pool plus every positive of every anchor
        pos_cols = positives.matrix[anchors].indices
        cols = np.union1d(np.asarray(negative_pool, dtype=np.int64), pos_cols)
    U, norms = _unit_rows(Z)
    C = U[anchors] @ U[cols].T
    pos_mask = positives.matrix[anchors][:, cols].toarray() > 0
    self_mask = anchors[:, None] == cols[None, :]
    if negative_pool is None:
        neg_mask = ~pos_mask & ~self_mask
    else:
        in_pool = np.isin(cols, negative_pool)
        neg_mask = in_pool[None, :] & ~pos_mask & ~self_mask

    # cosine <= 1, so shifting the logits by 1/tau keeps exp() in range
    E = np.exp((C - 1.0) / tau)
    A = np.sum(E * pos_mask, axis=1)
    B = np.sum(E * neg_mask, axis=1)
    loss = float(np.sum(np.log(A + B) - np.log(A)))

    # d loss / d C
    G = E * (neg_mask / (A + B)[:, None] + pos_mask * (1.0 / (A + B) - 1.0 / A)[:, None]) / tau

    # C = U[anchors] U[cols]^T
    gU = np.zeros_like(Z)
    np.add.at(gU, anchors, G @ U[cols])
    np.add.at(gU, cols, G.T @ U[anchors])
    # through u = z / |z|; zero vectors get no gradient
    nz = norms > 0
    radial = np.sum(gU * U, axis=1)
    gZ[nz] = (gU[nz] - radial[nz, None] * U[nz]) / norms[nz, None]
    return loss, gZ
