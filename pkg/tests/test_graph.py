import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import betti_by_threshold, random_weights
from topoclust.errors import EmptyGraph, NotSymmetric, ShapeMismatch, ValidationError
from topoclust.graph import (
    UnionFind,
    WeightedGraph,
    betti_curve,
    complete_graph,
    from_edges,
    load_graph_csv,
    save_graph_csv,
    sort_edges,
    threshold,
)


def triangle():
    return from_edges(3, [(0, 1), (0, 2), (1, 2)], [0.5, 0.3, 0.8])


def test_diagonal_is_sentinel_and_array_is_frozen():
    g = complete_graph(np.ones(3))
    assert np.isnan(np.diag(g.weights)).all()
    with pytest.raises(ValueError):
        g.weights[0, 1] = 2.0


def test_rejects_asymmetric_and_infinite():
    w = np.array([[np.nan, 1.0], [2.0, np.nan]])
    with pytest.raises(NotSymmetric):
        WeightedGraph(w)
    with pytest.raises(ValidationError):
        WeightedGraph(np.array([[np.nan, np.inf], [np.inf, np.nan]]))


def test_sorted_edges_of_triangle():
    e = sort_edges(triangle())
    assert e.weights.tolist() == [0.3, 0.5, 0.8]
    assert len(sort_edges(complete_graph(np.random.default_rng(0).random(6)))) == 6


def test_ties_broken_by_node_pair():
    g = from_edges(3, [(1, 2), (0, 2), (0, 1)], [0.5, 0.5, 0.9])
    e = sort_edges(g)
    assert list(zip(e.rows.tolist(), e.cols.tolist())) == [(0, 2), (1, 2), (0, 1)]


def test_tie_rule_is_strict_total_order_on_small_weightings():
    # every weighting of K4 with values in {0, 1, 2} gives a strict order on (w, i, j)
    pairs = list(itertools.combinations(range(4), 2))
    for vals in itertools.product((0.0, 1.0, 2.0), repeat=len(pairs)):
        e = sort_edges(from_edges(4, pairs, vals))
        keys = list(zip(e.weights.tolist(), e.rows.tolist(), e.cols.tolist()))
        assert all(a < b for a, b in zip(keys, keys[1:]))


def test_empty_graph_has_no_edges_to_sort():
    with pytest.raises(EmptyGraph):
        sort_edges(WeightedGraph(np.full((3, 3), np.nan)))


def test_threshold_keeps_strictly_heavier_edges():
    g = triangle()
    assert threshold(g, 0.4).edge_count == 2
    assert threshold(g, 0.2).edge_count == 3
    assert threshold(g, 0.8).edge_count == 0


def test_betti_of_cycle_and_endpoint():
    g = from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)], [0.4, 0.6, 0.7, 0.9])
    c = betti_curve(g)
    assert c.at(0.0) == (1, 1)
    assert (c.beta0[-1], c.beta1[-1]) == (4, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.floats(0.3, 1.0), st.integers(0, 2**31))
def test_betti_matches_component_count(p, density, seed):
    w = random_weights(np.random.default_rng(seed), p, density)
    g = WeightedGraph(w)
    c = betti_curve(g)
    assert np.all(np.diff(c.beta0) >= 0)
    assert np.all(np.diff(c.beta1) <= 0)
    assert np.array_equal(c.euler_characteristic(), p - c.edge_counts)
    for eps in np.unique(np.r_[-1.0, w[~np.isnan(w)]]):
        assert c.at(eps) == betti_by_threshold(w, eps)


def test_union_find_tracks_components():
    uf = UnionFind(5)
    assert uf.union(0, 1) and uf.union(3, 4)
    assert not uf.union(1, 0)
    assert uf.components == 3


def test_csv_round_trip(tmp_path):
    g = from_edges(4, [(0, 1), (1, 2), (2, 3)], [0.1, -0.25, 1 / 3])
    path = tmp_path / "g.csv"
    save_graph_csv(g, path)
    assert "NA" in path.read_text()
    back = load_graph_csv(path)
    assert np.array_equal(np.isnan(back.weights), np.isnan(g.weights))
    assert np.allclose(np.nan_to_num(back.weights), np.nan_to_num(g.weights), rtol=0, atol=0)


def test_csv_symmetrizes_with_warning(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("NA,0.5\n0.7,NA\n")
    with pytest.warns(UserWarning, match="asymmetry"):
        g = load_graph_csv(path)
    assert g.weights[0, 1] == pytest.approx(0.6)
    path.write_text("NA,0.5\n0.5,NA\n")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        load_graph_csv(path)


def test_csv_rejects_non_square(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("NA,0.5,1\n0.5,NA,1\n")
    with pytest.raises(ShapeMismatch):
        load_graph_csv(path)


def test_scalar_operators():
    g = triangle()
    assert np.allclose((g * 2).weights[0, 1], 1.0)
    assert np.allclose((g + 1).weights[1, 2], 1.8)
