"""Full-ranking top-K evaluation (Recall, Precision, NDCG with binary relevance)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .graphs import TEST, TRAIN, VAL, InteractionGraph


@dataclass
class MetricsReport:
    recall: float
    precision: float
    ndcg: float
    k: int = 10
    users_evaluated: int = 0
    per_user: dict[int, tuple[float, float, float]] | None = field(default=None, repr=False)

    def as_dict(self) -> dict[str, float]:
        return {f"recall@{self.k}": self.recall, f"precision@{self.k}": self.precision,
                f"ndcg@{self.k}": self.ndcg}

    def lines(self) -> str:
        return "\n".join(f"{k}={v:.6f}" for k, v in self.as_dict().items())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            for k, v in self.as_dict().items():
                w.writerow([k, repr(float(v))])
            w.writerow(["users_evaluated", self.users_evaluated])


def rank_items(u: int, P: np.ndarray, Q: np.ndarray, exclude=()) -> np.ndarray:
    """All non-excluded items by descending score, ties by ascending item index."""
    scores = Q @ P[u]
    items = np.setdiff1d(np.arange(Q.shape[0]), np.fromiter(exclude, dtype=np.int64))
    return items[np.lexsort((items, -scores[items]))]


def _ideal_dcg(n: int) -> float:
    return float(np.sum(1.0 / np.log2(np.arange(2, n + 2))))


def user_metrics(ranking, relevant, k: int) -> tuple[float, float, float]:
    top = np.asarray(ranking[:k])
    hits = np.isin(top, np.fromiter(relevant, dtype=np.int64))
    nh = int(hits.sum())
    dcg = float(np.sum(hits / np.log2(np.arange(2, len(top) + 2))))
    return nh / len(relevant), nh / k, dcg / _ideal_dcg(min(len(relevant), k))


def metrics_at_k(rankings, test_sets, k: int = 10, keep_per_user: bool = False) -> MetricsReport:
    """Mean Recall/Precision/NDCG@k over users with a non-empty test set.

    ``rankings`` and ``test_sets`` are indexed by user (sequences or dicts).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    users = test_sets.keys() if isinstance(test_sets, dict) else range(len(test_sets))
    per = {}
    for u in users:
        rel = test_sets[u]
        if not rel:
            continue
        per[u] = user_metrics(rankings[u], rel, k)
    if not per:
        return MetricsReport(0.0, 0.0, 0.0, k, 0, per if keep_per_user else None)
    arr = np.array(list(per.values()))
    r, p, n = arr.mean(axis=0)
    return MetricsReport(float(r), float(p), float(n), k, len(per), per if keep_per_user else None)


def evaluate(P: np.ndarray, Q: np.ndarray, graph: InteractionGraph, split: int = TEST, k: int = 10,
             keep_per_user: bool = False) -> MetricsReport:
    """Score every item for every user holding ``split`` items; earlier splits are excluded.

    Validation excludes training items; test excludes training and validation items.
    """
    excluded = [TRAIN] if split == VAL else [TRAIN, VAL]
    target = graph.mask(split)
    users = np.unique(graph.users[target])
    if len(users) == 0:
        return MetricsReport(0.0, 0.0, 0.0, k, 0)
    scores = P[users] @ Q.T
    row_of = np.full(graph.num_users, -1, dtype=np.int64)
    row_of[users] = np.arange(len(users))
    ex = np.isin(graph.split, excluded) & (row_of[graph.users] >= 0)
    scores[row_of[graph.users[ex]], graph.items[ex]] = -np.inf
    # stable sort keeps ascending item order among equal scores
    top = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    rel = np.zeros_like(scores, dtype=bool)
    rel[row_of[graph.users[target]], graph.items[target]] = True
    hits = np.take_along_axis(rel, top, axis=1)
    n_rel = rel.sum(axis=1)
    disc = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = hits @ disc[:hits.shape[1]]
    idcg = np.cumsum(disc)[np.minimum(n_rel, k) - 1]
    recall = hits.sum(axis=1) / n_rel
    precision = hits.sum(axis=1) / k
    ndcg = dcg / idcg
    per = None
    if keep_per_user:
        per = {int(u): (float(a), float(b), float(c)) for u, a, b, c in zip(users, recall, precision, ndcg)}
    return MetricsReport(float(recall.mean()), float(precision.mean()), float(ndcg.mean()), k, len(users), per)
