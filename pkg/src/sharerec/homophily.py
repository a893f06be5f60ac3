"""Preference-aware homophily: per-edge Jaccard ratios, graph summary, and synthetic sub-graphs."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graphs import TRAIN, InteractionGraph, SocialGraph

logger = logging.getLogger(__name__)


class UnreachableTargetError(ValueError):
    def __init__(self, target, achieved):
        super().__init__(f"target homophily {target:.4f} unreachable; best achieved {achieved:.4f}")
        self.target = target
        self.achieved = achieved


def edge_homophily(i: int, j: int, graph: InteractionGraph) -> float:
    """Jaccard ratio of two users' training item sets (0 if either set is empty)."""
    a, b = graph.train_item_sets[i], graph.train_item_sets[j]
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def pair_homophily(graph: InteractionGraph, rows, cols) -> np.ndarray:
    """Vectorised ``edge_homophily`` over index arrays."""
    R = graph.matrix(TRAIN)
    return kernels.jaccard_pairs(R.indptr, R.indices, rows, cols)


@dataclass
class HomophilyTable:
    rows: np.ndarray
    cols: np.ndarray
    ratios: np.ndarray
    graph_ratio: float
    histogram: list[tuple[float, float, int]]
    h_min: float
    h_max: float

    @property
    def num_edges(self) -> int:
        return len(self.ratios)

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(h) for i, j, h in zip(self.rows, self.cols, self.ratios)}

    def write_histogram(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lower", "bin_upper", "count"])
            for lo, hi, c in self.histogram:
                w.writerow([f"{lo:.6g}", f"{hi:.6g}", c])


def graph_homophily(S: SocialGraph, graph: InteractionGraph, bins: int = 50) -> HomophilyTable:
    """Per-edge ratios over undirected edges (each pair once) and their mean."""
    if S.num_edges == 0:
        raise ValueError("graph homophily is undefined for an empty social graph")
    ratios = pair_homophily(graph, S.rows, S.cols)
    counts, edges = np.histogram(ratios, bins=bins, range=(0.0, 1.0))
    hist = [(float(edges[k]), float(edges[k + 1]), int(counts[k])) for k in range(bins)]
    return HomophilyTable(
        rows=S.rows.copy(), cols=S.cols.copy(), ratios=ratios,
        graph_ratio=float(ratios.mean()), histogram=hist,
        h_min=float(ratios.min()), h_max=float(ratios.max()),
    )


def induced_subgraph(graph: InteractionGraph, users: np.ndarray) -> InteractionGraph:
    """Interactions of ``users`` (split tags kept), with users and items re-indexed compactly."""
    users = np.sort(np.asarray(users, dtype=np.int64))
    remap = np.full(graph.num_users, -1, dtype=np.int64)
    remap[users] = np.arange(len(users))
    keep = remap[graph.users] >= 0
    items_kept = np.unique(graph.items[keep])
    iremap = np.full(graph.num_items, -1, dtype=np.int64)
    iremap[items_kept] = np.arange(len(items_kept))
    return InteractionGraph(
        len(users), len(items_kept),
        remap[graph.users[keep]], iremap[graph.items[keep]], graph.ratings[keep], graph.split[keep],
        [graph.user_ids[u] for u in users], [graph.item_ids[v] for v in items_kept],
    )


def synthesize_subgraph(graph: InteractionGraph, target: float, user_range=(590, 600), seed: int = 0,
                        avg_degree: float | None = None, source_social: SocialGraph | None = None,
                        tolerance: float = 0.02) -> tuple[SocialGraph, InteractionGraph]:
    """Sample a user subset and build a social graph whose mean homophily hits ``target``.

    All pairs among the sampled users are scored, partitioned into a high pool
    (h > target) and a low pool (h <= target), each shuffled under the seed.
    Edges are then drawn one at a time from whichever pool moves the running
    mean toward the target, until the edge budget is spent.

    The user subset depends only on ``seed`` and ``user_range``, so sweeping
    targets with one seed varies the social graph over fixed interactions.
    """
    lo, hi = user_range
    if lo > hi:
        raise ValueError(f"bad user range {user_range}")
    if not 0.0 <= target <= 1.0:
        raise ValueError(f"target must lie in [0, 1], got {target}")
    rng = np.random.default_rng(seed)
    active = np.flatnonzero([len(s) > 0 for s in graph.train_item_sets])
    k = int(rng.integers(lo, hi + 1))
    if k > len(active):
        raise ValueError(f"only {len(active)} users with training interactions, need {k}")
    chosen = np.sort(rng.choice(active, size=k, replace=False))
    sub = induced_subgraph(graph, chosen)

    if avg_degree is None:
        avg_degree = 2.0 * source_social.num_edges / source_social.num_users if source_social else 10.0
    budget = int(round(avg_degree * k / 2.0))

    iu, ju = np.triu_indices(k, k=1)
    h = pair_homophily(sub, iu, ju)
    high = np.flatnonzero(h > target)
    low = np.flatnonzero(h <= target)
    rng.shuffle(high)
    rng.shuffle(low)

    picked = np.empty(min(budget, len(h)), dtype=np.int64)
    total, hp, lp = 0.0, 0, 0
    for step in range(len(picked)):
        mean = total / step if step else 0.0
        take_high = mean < target
        if take_high and hp >= len(high):
            take_high = False
        elif not take_high and lp >= len(low):
            take_high = True
        if take_high:
            idx = high[hp]
            hp += 1
        else:
            idx = low[lp]
            lp += 1
        picked[step] = idx
        total += h[idx]
    achieved = total / len(picked) if len(picked) else 0.0
    if len(picked) == 0 or abs(achieved - target) > tolerance:
        raise UnreachableTargetError(target, achieved)
    logger.info("synthesized %d users, %d edges, H_s=%.4f (target %.4f)", k, len(picked), achieved, target)
    return SocialGraph(k, iu[picked], ju[picked]), sub
