import pytest
from hypothesis import given, strategies as st

from bundle_extra.graph import (
    Graph,
    GraphError,
    complete_graph,
    is_connected,
    neighbors,
    path_graph,
    random_connected_graph,
    read_edge_list,
    star_graph,
    write_edge_list,
)

from oracles import bfs_connected


def test_two_nodes_single_edge():
    for seed in range(5):
        assert random_connected_graph(2, 1, seed).edges == frozenset({(0, 1)})


def test_benchmark_sized_graph_is_connected():
    g = random_connected_graph(20, 32, 7)
    assert g.num_edges == 32
    assert is_connected(g)


def test_infeasible_edge_count_rejected():
    with pytest.raises(GraphError):
        random_connected_graph(5, 11, 0)
    with pytest.raises(GraphError):
        random_connected_graph(5, 3, 0)


def test_is_connected_examples():
    assert is_connected(path_graph(3))
    assert not is_connected(Graph(4, frozenset({(0, 1), (2, 3)})))


def test_neighbors_examples():
    p = path_graph(3)
    assert neighbors(p, 1) == {0, 2}
    assert neighbors(p, 0) == {1}
    assert len(neighbors(star_graph(5), 0)) == 4
    with pytest.raises(IndexError):
        neighbors(p, 3)


def test_invalid_edges_rejected():
    with pytest.raises(GraphError):
        Graph(3, frozenset({(1, 1)}))
    with pytest.raises(GraphError):
        Graph(3, frozenset({(0, 3)}))


def test_edges_are_normalized():
    assert Graph(3, frozenset({(2, 0)})).edges == frozenset({(0, 2)})


@given(n=st.integers(2, 25), extra=st.integers(0, 40), seed=st.integers(0, 2**32 - 1))
def test_generator_properties(n, extra, seed):
    m = min(n - 1 + extra, n * (n - 1) // 2)
    g = random_connected_graph(n, m, seed)
    assert g.num_edges == m
    assert bfs_connected(n, g.edges)
    assert random_connected_graph(n, m, seed).edges == g.edges
    for i in range(n):
        for j in neighbors(g, i):
            assert i in neighbors(g, j) and i != j


def test_edge_list_round_trip(tmp_path):
    g = random_connected_graph(12, 20, 4)
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    assert path.read_text().splitlines()[0] == "12 20"
    assert read_edge_list(path) == g


def test_complete_graph_degrees():
    assert (complete_graph(6).degrees() == 5).all()
