import numpy as np
import pytest
import scipy.sparse as sp

from sharerec.graphs import (TEST, TRAIN, VAL, EmptyGraphError, GraphFormatError, InteractionGraph, SocialGraph,
                             load_interactions, load_social, normalized_views, row_normalize, split, sym_normalize,
                             write_interactions, write_social)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_duplicates_keep_max_rating_then_threshold(tmp_path):
    p = _write(tmp_path, "r.txt", "a x 2\na x 5\nb x 3\nb y 1\nc z 4\n")
    g = load_interactions(p, rating_threshold=3)
    assert g.num_users == 3 and g.num_items == 2
    assert g.num_edges == 3
    assert sorted(g.ratings.tolist()) == [3.0, 4.0, 5.0]
    assert g.user_ids == ["a", "b", "c"]


def test_threshold_that_drops_everything_raises(tmp_path):
    p = _write(tmp_path, "r.txt", "a x 1\n")
    with pytest.raises(EmptyGraphError):
        load_interactions(p, rating_threshold=2)


def test_bad_line_raises(tmp_path):
    p = _write(tmp_path, "r.txt", "a x 1 extra\n")
    with pytest.raises(GraphFormatError):
        load_interactions(p)


def test_header_line_is_skipped(tmp_path):
    p = _write(tmp_path, "r.txt", "userID artistID weight\n1 7 10\n")
    g = load_interactions(p, header=True)
    assert g.user_ids == ["1"] and g.item_ids == ["7"]


def test_social_symmetrised_unknown_ids_and_self_loops_skipped(tmp_path, caplog):
    g = load_interactions(_write(tmp_path, "r.txt", "a x\nb x\nc y\n"))
    s = load_social(_write(tmp_path, "s.txt", "a b\nb a\nc c\na zz\nb c\n"), g)
    assert s.edge_set() == {(0, 1), (1, 2)}
    assert "unknown" in caplog.text
    M = s.matrix().toarray()
    assert np.array_equal(M, M.T)


def test_social_empty_after_resolution_raises(tmp_path):
    g = load_interactions(_write(tmp_path, "r.txt", "a x\n"))
    with pytest.raises(EmptyGraphError):
        load_social(_write(tmp_path, "s.txt", "q r\n"), g)


def test_social_graph_rejects_self_loops_and_duplicates():
    with pytest.raises(ValueError):
        SocialGraph(3, [0], [0])
    with pytest.raises(ValueError):
        SocialGraph(3, [0, 1], [1, 0])


def test_round_trip_files(tmp_path):
    g = load_interactions(_write(tmp_path, "r.txt", "a x 4\nb y 2.5\nb x 1\n"))
    s = SocialGraph(g.num_users, [0], [1], [0.25])
    write_interactions(g, tmp_path / "r2.txt")
    write_social(s, tmp_path / "s2.txt", g.user_ids, weighted=True)
    g2 = load_interactions(tmp_path / "r2.txt")
    s2 = load_social(tmp_path / "s2.txt", g2, weighted=True)
    assert np.array_equal(g.matrix(None).toarray(), g2.matrix(None).toarray())
    assert s2.weights.tolist() == [0.25]


def test_split_exact_counts_and_determinism():
    rng = np.random.default_rng(0)
    u, v = np.nonzero(rng.random((30, 40)) < 0.3)
    g = InteractionGraph(30, 40, u, v, np.ones(len(u)))
    a = split(g, (0.8, 0.1, 0.1), seed=3)
    b = split(g, (0.8, 0.1, 0.1), seed=3)
    e = g.num_edges
    assert np.array_equal(a.split, b.split)
    assert (a.split == VAL).sum() == round(0.1 * e)
    assert (a.split == TEST).sum() == round(0.1 * e)
    assert (a.split == TRAIN).sum() == e - 2 * round(0.1 * e)


def test_split_all_train_and_bad_ratios():
    g = InteractionGraph(2, 2, [0, 1], [0, 1], [1, 1])
    assert (split(g, (1, 0, 0)).split == TRAIN).all()
    with pytest.raises(ValueError):
        split(g, (0.5, 0.2, 0.2))


def test_row_and_symmetric_normalisation():
    R = sp.csr_matrix(np.array([[1, 1, 0], [0, 1, 0], [0, 0, 0]], dtype=float))
    rn = row_normalize(R).toarray()
    assert np.allclose(rn.sum(axis=1), [1, 1, 0])
    sn = sym_normalize(R).toarray()
    # |N_u0| = 2, |N_v1| = 2
    assert sn[0, 1] == pytest.approx(1 / 2)
    assert sn[1, 1] == pytest.approx(1 / np.sqrt(2))
    s = SocialGraph(3, [0], [1], [0.5])
    views = normalized_views(R, s)
    assert np.allclose(views.S.toarray().sum(axis=1), [1, 1, 0])
    assert views.Rt.shape == (3, 3)


def test_matrix_uses_train_split_only():
    g = InteractionGraph(2, 3, [0, 0, 1], [0, 1, 2], [1, 1, 1], [TRAIN, VAL, TEST])
    assert g.matrix().toarray().tolist() == [[1, 0, 0], [0, 0, 0]]
    assert g.train_item_sets[0] == frozenset({0})
