"""Synthetic source population with latent taste communities.

Stands in for a real social-recommendation dataset when none is on disk.
Items are split into blocks, one per taste group; every group holds a few
sub-communities, each with a small core list of block items. A user takes
each core item of their sub-community with probability ``core_prob`` and adds
a short tail, mostly from the group block (Zipf-skewed) and otherwise from
the whole catalogue. Friendships mix same-group and random pairs, which
gives a low-homophily social graph like the real ones while leaving enough
strongly overlapping pairs to synthesize high-homophily sub-graphs.
"""

from __future__ import annotations

import numpy as np

from .graphs import InteractionGraph, SocialGraph


def _zipf(k: int, a: float) -> np.ndarray:
    w = 1.0 / np.arange(1, k + 1) ** a
    return w / w.sum()


def generate_population(num_users: int = 1000, num_items: int = 1200, num_groups: int = 15,
                        subgroups: int = 1, core_size: int = 10, core_prob: float = 0.6,
                        tail=(0, 3), in_group: float = 0.7, zipf: float = 1.0,
                        avg_degree: float = 8.0, same_group_friends: float = 0.2,
                        seed: int = 0) -> tuple[InteractionGraph, SocialGraph]:
    """Return ``(interactions, social)`` for a seeded synthetic population (all edges untagged/train)."""
    rng = np.random.default_rng(seed)
    blocks = np.array_split(rng.permutation(num_items), num_groups)
    block_w = [_zipf(len(b), zipf) for b in blocks]
    cores = [[rng.choice(b, size=min(core_size, len(b)), replace=False, p=w) for _ in range(subgroups)]
             for b, w in zip(blocks, block_w)]
    global_w = _zipf(num_items, zipf)[rng.permutation(num_items)]

    group = rng.integers(0, num_groups, size=num_users)
    sub = rng.integers(0, subgroups, size=num_users)
    users, items = [], []
    for u in range(num_users):
        g = group[u]
        core = cores[g][sub[u]]
        picked = core[rng.random(len(core)) < core_prob]
        if len(picked) == 0:
            picked = core[:1]
        n_tail = int(rng.integers(tail[0], tail[1] + 1))
        n_block = rng.binomial(n_tail, in_group)
        extra = [rng.choice(blocks[g], size=min(n_block, len(blocks[g])), replace=False, p=block_w[g]),
                 rng.choice(num_items, size=n_tail - n_block, replace=False, p=global_w)]
        chosen = np.unique(np.concatenate([picked, *extra]))
        users.extend([u] * len(chosen))
        items.extend(chosen.tolist())
    inter = InteractionGraph(num_users, num_items, users, items, np.ones(len(users)))

    target_edges = int(round(avg_degree * num_users / 2))
    members = [np.flatnonzero(group == g) for g in range(num_groups)]
    seen: set[tuple[int, int]] = set()
    while len(seen) < target_edges:
        a = int(rng.integers(num_users))
        if rng.random() < same_group_friends:
            peers = members[group[a]]
            b = int(peers[rng.integers(len(peers))])
        else:
            b = int(rng.integers(num_users))
        if a != b:
            seen.add((min(a, b), max(a, b)))
    pairs = np.array(sorted(seen), dtype=np.int64)
    return inter, SocialGraph(num_users, pairs[:, 0], pairs[:, 1])
