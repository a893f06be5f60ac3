from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sharerec.graphs import TRAIN, InteractionGraph, SocialGraph, load_interactions, load_social
from sharerec.homophily import (UnreachableTargetError, edge_homophily, graph_homophily, induced_subgraph,
                                pair_homophily, synthesize_subgraph)
from sharerec.datasets import generate_population


def _expected(micro_dir):
    out = {}
    for line in (micro_dir / "expected.txt").read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        a, b, frac = line.split()
        out[(a, b)] = Fraction(frac)
    return out


def test_micro_fixture_edge_ratios(micro_dir):
    g = load_interactions(micro_dir / "interactions.txt")
    s = load_social(micro_dir / "social.txt", g)
    idx = g.user_index()
    for (a, b), frac in _expected(micro_dir).items():
        assert edge_homophily(idx[a], idx[b], g) == pytest.approx(float(frac), abs=1e-12)
    table = graph_homophily(s, g)
    assert table.graph_ratio == pytest.approx(5 / 14, abs=1e-12)
    assert table.h_min == 0.0 and table.h_max == 0.75
    assert sum(c for _, _, c in table.histogram) == 7


def test_cold_start_user_has_zero_homophily():
    g = InteractionGraph(3, 2, [0, 1], [0, 0], [1, 1], [TRAIN, 1])
    # user 1 only has a validation item, user 2 has nothing
    assert edge_homophily(0, 1, g) == 0.0
    assert edge_homophily(1, 2, g) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_pair_homophily_matches_set_jaccard(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(2, 12, size=2)
    u, v = np.nonzero(rng.random((m, n)) < 0.4)
    g = InteractionGraph(int(m), int(n), u, v, np.ones(len(u)))
    rows, cols = rng.integers(0, m, size=(2, 15))
    got = pair_homophily(g, rows, cols)
    sets = g.train_item_sets
    for r, c, h in zip(rows, cols, got):
        a, b = sets[r], sets[c]
        ref = len(a & b) / len(a | b) if a and b else 0.0
        assert h == pytest.approx(ref, abs=1e-15)


def test_histogram_csv(tmp_path, micro_dir):
    g = load_interactions(micro_dir / "interactions.txt")
    t = graph_homophily(load_social(micro_dir / "social.txt", g), g, bins=4)
    t.write_histogram(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "bin_lower,bin_upper,count"
    assert len(lines) == 5


def test_induced_subgraph_keeps_only_chosen_users():
    g = InteractionGraph(4, 3, [0, 1, 2, 3], [0, 1, 2, 0], [1, 1, 1, 1])
    sub = induced_subgraph(g, np.array([1, 3]))
    assert sub.num_users == 2 and sub.num_edges == 2


@pytest.fixture(scope="module")
def population():
    return generate_population(seed=1)


def test_synth_zero_target_is_exact(population):
    inter, social = population
    S, sub = synthesize_subgraph(inter, 0.0, (100, 110), seed=2, source_social=social)
    assert graph_homophily(S, sub).graph_ratio == 0.0
    assert 100 <= sub.num_users <= 110


def test_synth_repeat_seed_identical(population):
    inter, social = population
    a, _ = synthesize_subgraph(inter, 0.2, (200, 210), seed=4, source_social=social)
    b, _ = synthesize_subgraph(inter, 0.2, (200, 210), seed=4, source_social=social)
    assert np.array_equal(a.edges(), b.edges())


def test_synth_unreachable_target_raises(population):
    inter, social = population
    with pytest.raises(UnreachableTargetError) as info:
        synthesize_subgraph(inter, 0.95, (100, 110), seed=0, source_social=social)
    assert info.value.target == 0.95


def test_synth_rejects_bad_arguments(population):
    inter, _ = population
    with pytest.raises(ValueError):
        synthesize_subgraph(inter, 1.5)
    with pytest.raises(ValueError):
        synthesize_subgraph(inter, 0.1, (20, 10))
