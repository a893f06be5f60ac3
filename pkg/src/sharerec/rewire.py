"""Interaction-only user encoder and similarity-driven social graph rewiring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .graphs import TRAIN, InteractionGraph, SocialGraph, sym_normalize


@dataclass
class UserCodes:
    Z: np.ndarray
    layers: int


class Encoder:
    """Parameter-free bipartite encoder driven by item embeddings.

    Layer 1 gathers items into users with 1/sqrt(|N_u||N_v|) weights; every
    further layer first pushes the current user codes back to items, then
    gathers again. Output is the last user layer:
    ``Z = R_sym (R_sym^T R_sym)^(layers-1) Q``.
    """

    def __init__(self, R: InteractionGraph | sp.spmatrix, layers: int = 2):
        if layers < 1:
            raise ValueError("encoder needs at least one layer")
        Rm = R.matrix(TRAIN) if isinstance(R, InteractionGraph) else R
        self.R = sym_normalize(Rm)
        self.Rt = sp.csr_matrix(self.R.T)
        self.layers = layers

    def forward(self, Q: np.ndarray) -> np.ndarray:
        Z = self.R @ Q
        for _ in range(self.layers - 1):
            Z = self.R @ (self.Rt @ Z)
        return Z

    def backward(self, gZ: np.ndarray) -> np.ndarray:
        g = self.Rt @ gZ
        for _ in range(self.layers - 1):
            g = self.Rt @ (self.R @ g)
        return g


def encode_users(R: InteractionGraph | sp.spmatrix, Q_enc: np.ndarray, layers: int = 2) -> UserCodes:
    return UserCodes(Encoder(R, layers).forward(Q_enc), layers)


def _unit_rows(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(Z, axis=1)
    U = np.zeros_like(Z)
    nz = norms > 0
    U[nz] = Z[nz] / norms[nz, None]
    return U, norms


def cosine(zi: np.ndarray, zj: np.ndarray) -> float:
    ni, nj = np.linalg.norm(zi), np.linalg.norm(zj)
    if ni == 0 or nj == 0:
        return 0.0
    return float(zi @ zj / (ni * nj))


def pairwise_cosine(Z: UserCodes | np.ndarray) -> np.ndarray:
    """Dense m x m cosine matrix; rows/columns of zero vectors are 0."""
    Z = Z.Z if isinstance(Z, UserCodes) else Z
    U, _ = _unit_rows(Z)
    C = U @ U.T
    np.clip(C, -1.0, 1.0, out=C)
    return C


@dataclass
class RewireReport:
    cut_edges: np.ndarray
    added_edges: np.ndarray
    M: int
    weight_min: float
    weight_max: float
    weight_mean: float
    epoch: int | None = None
    iteration: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def cut_count(self) -> int:
        return len(self.cut_edges)

    @property
    def add_count(self) -> int:
        return len(self.added_edges)


def cut_edges(S: SocialGraph, C: np.ndarray):
    """Split edges into (cut, remain, M) by the rule c <= 0."""
    E = S.edges()
    c = C[S.rows, S.cols]
    cut = c <= 0
    return E[cut], E[~cut], int(cut.sum())


def add_edges(S: SocialGraph, C: np.ndarray, M: int, candidate_cap: int | None = None) -> np.ndarray:
    """Top-M positive-similarity non-edges, ties by ascending (i, j).

    ``candidate_cap`` keeps only each row's ``cap`` most similar users as
    candidates, bounding the candidate list for large user counts.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    if M == 0:
        return np.zeros((0, 2), dtype=np.int64)
    adj = S.matrix()
    if candidate_cap is not None:
        C = _cap_rows(C, candidate_cap)
    rows, cols, vals = kernels.positive_nonedge_pairs(C, adj.indptr, adj.indices)
    if len(vals) > M:
        # keep every candidate tied with the M-th best before the exact sort
        kth = np.partition(vals, len(vals) - M)[len(vals) - M]
        keep = vals >= kth
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    order = np.lexsort((cols, rows, -vals))[:M]
    return np.stack([rows[order], cols[order]], axis=1)


def _cap_rows(C: np.ndarray, cap: int) -> np.ndarray:
    m = C.shape[0]
    if cap >= m - 1:
        return C
    D = C.copy()
    np.fill_diagonal(D, -np.inf)
    top = np.argpartition(-D, cap, axis=1)[:, :cap]
    keep = np.zeros_like(C, dtype=bool)
    keep[np.arange(m)[:, None], top] = True
    keep |= keep.T
    return np.where(keep, C, 0.0)


def build_rewired(remain: np.ndarray, added: np.ndarray, C: np.ndarray, num_users: int) -> SocialGraph:
    """Rewired graph on remain + added with min-max scaled similarities as weights.

    A degenerate range (all retained similarities equal) gives unit weights.
    """
    E = np.concatenate([np.asarray(remain, dtype=np.int64).reshape(-1, 2),
                        np.asarray(added, dtype=np.int64).reshape(-1, 2)])
    if len(E) == 0:
        return SocialGraph(num_users, np.zeros(0, np.int64), np.zeros(0, np.int64))
    c = C[E[:, 0], E[:, 1]]
    lo, hi = c.min(), c.max()
    w = np.ones_like(c) if hi == lo else (c - lo) / (hi - lo)
    return SocialGraph(num_users, E[:, 0], E[:, 1], np.clip(w, 0.0, 1.0))


def rewire(S: SocialGraph, Z: UserCodes | np.ndarray, *, cut: bool = True, add: bool = True,
           unit_weights: bool = False, candidate_cap: int | None = None,
           C: np.ndarray | None = None) -> tuple[SocialGraph, RewireReport]:
    """Cut non-positive edges, add as many top-similarity non-edges, and reweight.

    With ``cut=False`` the cut set is only counted (it still fixes M) and every
    original edge is kept; with ``add=False`` nothing is added.
    """
    if C is None:
        C = pairwise_cosine(Z)
    cut_set, remain, M = cut_edges(S, C)
    added = add_edges(S, C, M, candidate_cap) if add else np.zeros((0, 2), dtype=np.int64)
    if not cut:
        remain = S.edges()
        cut_set = np.zeros((0, 2), dtype=np.int64)
    new = build_rewired(remain, added, C, S.num_users)
    if unit_weights:
        new = new.unit_weights()
    w = new.weights
    report = RewireReport(
        cut_edges=cut_set, added_edges=added, M=M,
        weight_min=float(w.min()) if len(w) else 0.0,
        weight_max=float(w.max()) if len(w) else 0.0,
        weight_mean=float(w.mean()) if len(w) else 0.0,
    )
    return new, report
