"""Linear graph-based social recommender: propagation, scoring, BPR and negative sampling.

Both variants stack users and items into one state X = [P; Q] and iterate a
fixed block operator

    A = [[S_norm, R_u],
         [R_v,    0  ]]

averaging X over layers 0..L. The generic backbone uses row-normalized R and
R^T; the LightGCN+social variant uses the symmetric 1/sqrt(|N_u||N_v|) scaling
on the interaction blocks. Because the map from base tables to outputs is
linear, its backward pass is the same recurrence with A^T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .graphs import TRAIN, InteractionGraph, SocialGraph, normalized_views, row_normalize, sym_normalize

GENERIC = "generic-eq3"
LIGHTGCN_SOCIAL = "lightgcn-social"
BACKBONES = (GENERIC, LIGHTGCN_SOCIAL)


@dataclass
class PropagatedEmbeddings:
    P: np.ndarray
    Q: np.ndarray
    layers: int


class Propagator:
    def __init__(self, S: SocialGraph, R: InteractionGraph | sp.spmatrix, layers: int = 2,
                 kind: str = GENERIC):
        if layers < 1:
            raise ValueError("need at least one propagation layer")
        if kind not in BACKBONES:
            raise ValueError(f"unknown backbone {kind!r}; choose from {BACKBONES}")
        Rm = R.matrix(TRAIN) if isinstance(R, InteractionGraph) else sp.csr_matrix(R, dtype=np.float64)
        self.num_users, self.num_items = Rm.shape
        self.layers = layers
        self.kind = kind
        if kind == GENERIC:
            views = normalized_views(Rm, S)
            Ru, Rv = views.R, views.Rt
            Sn = views.S
        else:
            Ru = sym_normalize(Rm)
            Rv = sp.csr_matrix(Ru.T)
            Sn = row_normalize(S.matrix())
        zero = sp.csr_matrix((self.num_items, self.num_items))
        self.A = sp.csr_matrix(sp.bmat([[Sn, Ru], [Rv, zero]]))
        self.At = sp.csr_matrix(self.A.T)

    def _run(self, op, X0):
        acc = X0.copy()
        X = X0
        for _ in range(self.layers):
            X = op @ X
            acc += X
        return acc / (self.layers + 1)

    def forward(self, P0: np.ndarray, Q0: np.ndarray) -> PropagatedEmbeddings:
        out = self._run(self.A, np.vstack([P0, Q0]))
        return PropagatedEmbeddings(out[:self.num_users], out[self.num_users:], self.layers)

    def backward(self, gP: np.ndarray, gQ: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pull gradients on (P, Q) back to the base tables (P0, Q0)."""
        g = self._run(self.At, np.vstack([gP, gQ]))
        return g[:self.num_users], g[self.num_users:]


def propagate(S: SocialGraph, R: InteractionGraph, state, layers: int = 2) -> PropagatedEmbeddings:
    """Generic row-normalized social propagation, layer outputs mean-combined."""
    return Propagator(S, R, layers, GENERIC).forward(state.P0, state.Q0)


def propagate_lightgcn_social(S: SocialGraph, R: InteractionGraph, state, layers: int = 2) -> PropagatedEmbeddings:
    return Propagator(S, R, layers, LIGHTGCN_SOCIAL).forward(state.P0, state.Q0)


def score(P: np.ndarray, Q: np.ndarray, u: int, v: int) -> float:
    return float(P[u] @ Q[v])


def bpr_loss(users, pos, neg, P: np.ndarray, Q: np.ndarray):
    """Summed -log sigmoid(r_uv - r_uw) and its gradients w.r.t. P and Q."""
    return kernels.bpr_batch(P, Q, users, pos, neg)


def rec_loss_and_grad(propagator: Propagator, P0, Q0, users, pos, neg):
    """BPR through propagation: returns (loss, grad P0, grad Q0)."""
    out = propagator.forward(P0, Q0)
    loss, gP, gQ = bpr_loss(users, pos, neg, out.P, out.Q)
    g0P, g0Q = propagator.backward(gP, gQ)
    return loss, g0P, g0Q


class DegenerateUserError(ValueError):
    pass


def sample_negatives(users, R_train: InteractionGraph | sp.csr_matrix, rng: np.random.Generator) -> np.ndarray:
    """One uniform item per user from the items absent from that user's training set.

    Exactly one integer draw per sample (no rejection), so the stream advances
    by a fixed amount per call.
    """
    R = R_train.matrix(TRAIN) if isinstance(R_train, InteractionGraph) else R_train
    users = np.asarray(users, dtype=np.int64)
    free = R.shape[1] - np.diff(R.indptr)[users]
    if np.any(free <= 0):
        bad = users[free <= 0][0]
        raise DegenerateUserError(f"user {bad} has interacted with every item; no negative exists")
    draws = rng.integers(0, free)
    return kernels.nth_unseen_items(R.indptr, R.indices, users, draws)
