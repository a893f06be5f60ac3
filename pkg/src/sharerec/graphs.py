"""Interaction and social graph containers, edge-list I/O, splitting and normalized views."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

TRAIN, VAL, TEST = 0, 1, 2
SPLIT_NAMES = {TRAIN: "train", VAL: "val", TEST: "test"}


class GraphFormatError(ValueError):
    pass


class EmptyGraphError(ValueError):
    pass


@dataclass
class InteractionGraph:
    """Bipartite user-item graph. Edges are sorted by (user, item); ``split`` tags each edge."""

    num_users: int
    num_items: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    split: np.ndarray | None = None
    user_ids: list[str] | None = None
    item_ids: list[str] | None = None
    train_item_sets: list[frozenset] = field(init=False, repr=False)

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.ratings = np.asarray(self.ratings, dtype=np.float64)
        if self.split is None:
            self.split = np.zeros(len(self.users), dtype=np.int8)
        self.split = np.asarray(self.split, dtype=np.int8)
        if len(self.users) and (self.users.min() < 0 or self.users.max() >= self.num_users):
            raise ValueError("user index out of range")
        if len(self.items) and (self.items.min() < 0 or self.items.max() >= self.num_items):
            raise ValueError("item index out of range")
        if self.user_ids is None:
            self.user_ids = [str(i) for i in range(self.num_users)]
        if self.item_ids is None:
            self.item_ids = [str(i) for i in range(self.num_items)]
        self.train_item_sets = self.item_sets(TRAIN)

    @property
    def num_edges(self) -> int:
        return len(self.users)

    def mask(self, split: int) -> np.ndarray:
        return self.split == split

    def item_sets(self, split: int) -> list[frozenset]:
        sets: list[set] = [set() for _ in range(self.num_users)]
        m = self.mask(split)
        for u, v in zip(self.users[m].tolist(), self.items[m].tolist()):
            sets[u].add(v)
        return [frozenset(s) for s in sets]

    def matrix(self, split: int | None = TRAIN) -> sp.csr_matrix:
        """Binary m x n CSR matrix of the edges in ``split`` (all edges when None)."""
        m = np.ones(self.num_edges, dtype=bool) if split is None else self.mask(split)
        mat = sp.csr_matrix(
            (np.ones(int(m.sum())), (self.users[m], self.items[m])),
            shape=(self.num_users, self.num_items),
        )
        mat.sum_duplicates()
        mat.sort_indices()
        return mat

    def with_split(self, split: np.ndarray) -> "InteractionGraph":
        return InteractionGraph(
            self.num_users, self.num_items, self.users, self.items, self.ratings,
            split, self.user_ids, self.item_ids,
        )

    def user_index(self) -> dict[str, int]:
        return {uid: i for i, uid in enumerate(self.user_ids)}


@dataclass
class SocialGraph:
    """Undirected user-user graph stored once per pair with ``rows < cols``."""

    num_users: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray | None = None

    symmetric = True

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        w = np.ones(len(rows)) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        if np.any(rows == cols):
            raise ValueError("self-loops are not allowed in a social graph")
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if len(lo) > 1:
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if dup.any():
                raise ValueError("duplicate social edges")
        if len(lo) and (lo.min() < 0 or hi.max() >= self.num_users):
            raise ValueError("user index out of range")
        self.rows, self.cols, self.weights = lo, hi, w

    @property
    def num_edges(self) -> int:
        return len(self.rows)

    def edges(self) -> np.ndarray:
        return np.stack([self.rows, self.cols], axis=1)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def matrix(self) -> sp.csr_matrix:
        """Symmetric weighted m x m CSR adjacency."""
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        w = np.concatenate([self.weights, self.weights])
        mat = sp.csr_matrix((w, (r, c)), shape=(self.num_users, self.num_users))
        mat.sort_indices()
        return mat

    def degree(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.rows, self.cols]), minlength=self.num_users)

    def with_weights(self, weights) -> "SocialGraph":
        return SocialGraph(self.num_users, self.rows, self.cols, weights)

    def unit_weights(self) -> "SocialGraph":
        return SocialGraph(self.num_users, self.rows, self.cols, None)


def _read_lines(path, header: bool):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if header and lineno == 1:
                continue
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            yield lineno, s.split()


def load_interactions(path, rating_threshold: float = 0.0, header: bool = False) -> InteractionGraph:
    """Read ``user item [rating]`` lines.

    Duplicate pairs keep their maximum rating, then pairs rated below
    ``rating_threshold`` are dropped. Indices follow first appearance among
    retained edges.
    """
    best: dict[tuple[str, str], float] = {}
    for lineno, tok in _read_lines(path, header):
        if len(tok) not in (2, 3):
            raise GraphFormatError(f"{path}:{lineno}: expected 'user item [rating]', got {len(tok)} fields")
        try:
            rating = float(tok[2]) if len(tok) == 3 else 1.0
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: bad rating {tok[2]!r}") from None
        key = (tok[0], tok[1])
        if key not in best or rating > best[key]:
            best[key] = rating

    uidx: dict[str, int] = {}
    iidx: dict[str, int] = {}
    users, items, ratings = [], [], []
    for (u, v), r in best.items():
        if r < rating_threshold:
            continue
        users.append(uidx.setdefault(u, len(uidx)))
        items.append(iidx.setdefault(v, len(iidx)))
        ratings.append(r)
    if not users:
        raise EmptyGraphError(f"{path}: empty graph after filtering (threshold={rating_threshold})")
    return _build_interactions(len(uidx), len(iidx), users, items, ratings, None, list(uidx), list(iidx))


def _build_interactions(m, n, users, items, ratings, split, user_ids, item_ids) -> InteractionGraph:
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    order = np.lexsort((items, users))
    ratings = np.asarray(ratings, dtype=np.float64)[order]
    split = None if split is None else np.asarray(split)[order]
    return InteractionGraph(m, n, users[order], items[order], ratings, split, user_ids, item_ids)


def load_social(path, users: dict[str, int] | InteractionGraph, header: bool = False,
                weighted: bool = False) -> SocialGraph:
    """Read ``user user [weight]`` lines, resolving ids through the interaction index.

    Unknown ids and self-loops are skipped; reciprocal and repeated lines merge
    into one undirected edge. Weights are read only when ``weighted``; otherwise
    every edge has weight 1.
    """
    if isinstance(users, InteractionGraph):
        index, m = users.user_index(), users.num_users
    else:
        index, m = users, len(users)
    pairs: dict[tuple[int, int], float] = {}
    unknown = 0
    for lineno, tok in _read_lines(path, header):
        if len(tok) < 2 or len(tok) > 3:
            raise GraphFormatError(f"{path}:{lineno}: expected 'user user [weight]'")
        a, b = index.get(tok[0]), index.get(tok[1])
        if a is None or b is None:
            unknown += 1
            continue
        if a == b:
            continue
        w = 1.0
        if weighted and len(tok) == 3:
            try:
                w = float(tok[2])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: bad weight {tok[2]!r}") from None
        pairs[(min(a, b), max(a, b))] = w
    if unknown:
        logger.warning("%s: skipped %d relations with unknown user ids", path, unknown)
    if not pairs:
        raise EmptyGraphError(f"{path}: no resolvable social relations")
    keys = np.array(list(pairs), dtype=np.int64)
    return SocialGraph(m, keys[:, 0], keys[:, 1], np.fromiter(pairs.values(), dtype=np.float64))


def write_interactions(graph: InteractionGraph, path, split: int | None = None) -> None:
    m = np.ones(graph.num_edges, dtype=bool) if split is None else graph.mask(split)
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, r in zip(graph.users[m], graph.items[m], graph.ratings[m]):
            fh.write(f"{graph.user_ids[u]} {graph.item_ids[v]} {r:.17g}\n")


def write_social(graph: SocialGraph, path, user_ids: list[str] | None = None,
                 weighted: bool = False) -> None:
    ids = user_ids or [str(i) for i in range(graph.num_users)]
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, w in zip(graph.rows, graph.cols, graph.weights):
            if weighted:
                fh.write(f"{ids[i]} {ids[j]} {w:.17g}\n")
            else:
                fh.write(f"{ids[i]} {ids[j]}\n")


def split(graph: InteractionGraph, ratios=(0.8, 0.1, 0.1), seed: int = 0,
          rng: np.random.Generator | None = None) -> InteractionGraph:
    """Edge-uniform random train/val/test assignment with exact per-split counts."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    if graph.num_edges == 0:
        raise EmptyGraphError("cannot split an empty graph")
    rng = rng if rng is not None else np.random.default_rng(seed)
    e = graph.num_edges
    n_val = int(round(ratios[1] * e))
    n_test = int(round(ratios[2] * e))
    n_val = min(n_val, e)
    n_test = min(n_test, e - n_val)
    tags = np.zeros(e, dtype=np.int8)
    perm = rng.permutation(e)
    tags[perm[e - n_val - n_test:e - n_test]] = VAL
    tags[perm[e - n_test:]] = TEST
    return graph.with_split(tags)


def row_normalize(mat: sp.spmatrix) -> sp.csr_matrix:
    """D^-1 A with weighted row sums; zero rows stay zero."""
    mat = sp.csr_matrix(mat, dtype=np.float64)
    deg = np.asarray(mat.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    nz = deg != 0
    inv[nz] = 1.0 / deg[nz]
    out = sp.diags(inv) @ mat
    return sp.csr_matrix(out)


def sym_normalize(R: sp.spmatrix) -> sp.csr_matrix:
    """Entry (u, v) scaled by 1 / sqrt(|N_u| |N_v|); isolated nodes contribute nothing."""
    R = sp.csr_matrix(R, dtype=np.float64)
    du = np.asarray(R.sum(axis=1)).ravel()
    dv = np.asarray(R.sum(axis=0)).ravel()
    iu = np.zeros_like(du)
    iv = np.zeros_like(dv)
    iu[du > 0] = 1.0 / np.sqrt(du[du > 0])
    iv[dv > 0] = 1.0 / np.sqrt(dv[dv > 0])
    return sp.csr_matrix(sp.diags(iu) @ R @ sp.diags(iv))


class NormalizedViews(NamedTuple):
    S: sp.csr_matrix
    R: sp.csr_matrix
    Rt: sp.csr_matrix


def normalized_views(R: InteractionGraph | sp.spmatrix, S: SocialGraph) -> NormalizedViews:
    """Row-normalized S, R (train split) and R transpose."""
    Rm = R.matrix(TRAIN) if isinstance(R, InteractionGraph) else sp.csr_matrix(R)
    return NormalizedViews(row_normalize(S.matrix()), row_normalize(Rm), row_normalize(Rm.T))
