import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from graphrecover.errors import ParseError, ValidationError
from graphrecover.graph import (Graph, average_degree, clustering_coefficients, count_triangles,
                                jdd, largest_connected_component, load_edge_list,
                                save_edge_list)
from graphrecover.synthetic import (circulant_graph, complete_graph, cycle_graph,
                                    disjoint_union, erdos_renyi, path_graph, star_graph,
                                    stochastic_block_model)


@st.composite
def graphs(draw, max_n=25):
    n = draw(st.integers(1, max_n))
    p = draw(st.floats(0, 1))
    seed = draw(st.integers(0, 2**31))
    return erdos_renyi(n, p, seed=seed)


def test_load_path_graph():
    g = load_edge_list(["0 1", "1 2"])
    assert g.n == 3 and g.num_edges == 2


def test_load_collapses_orientation():
    assert load_edge_list(["0 1", "1 0"]).num_edges == 1


def test_load_rejects_self_loop():
    with pytest.raises(ValidationError):
        load_edge_list(["0 0"])


def test_load_malformed_line_reports_line_number():
    with pytest.raises(ParseError, match="line 3"):
        load_edge_list(["0 1", "# comment", "1 x"])
    with pytest.raises(ParseError, match="line 1"):
        load_edge_list(["0 1 2"])
    with pytest.raises(ParseError):
        load_edge_list(["-1 2"])


def test_load_comments_and_header():
    g = load_edge_list(io.StringIO("# nodes: 6\n0 1  # trailing\n\n2 3\n"))
    assert g.n == 6 and g.num_edges == 2


def test_load_empty_without_header_fails():
    with pytest.raises(ValidationError):
        load_edge_list([])


def test_from_edges_rejects_out_of_range():
    with pytest.raises(ValidationError):
        Graph.from_edges(3, [(0, 3)])


def test_from_dense_requires_symmetry():
    with pytest.raises(ValidationError):
        Graph.from_dense(np.array([[0, 1], [0, 0]]))


@given(graphs())
def test_round_trip(g):
    buf = io.StringIO()
    save_edge_list(g, buf)
    buf.seek(0)
    assert load_edge_list(buf) == g


def test_round_trip_file(tmp_path):
    g = erdos_renyi(30, 0.1, seed=4)
    save_edge_list(g, tmp_path / "g.edges")
    assert load_edge_list(tmp_path / "g.edges") == g
    lines = (tmp_path / "g.edges").read_text().splitlines()[1:]
    pairs = [tuple(map(int, ln.split())) for ln in lines]
    assert pairs == sorted(pairs) and all(u < v for u, v in pairs)


def test_lcc_tie_break_prefers_node_zero():
    g = disjoint_union(complete_graph(3), complete_graph(3), Graph.empty(1))
    lcc = largest_connected_component(g)
    assert lcc.n == 3 and lcc.num_edges == 3
    # move the first triangle to the end: the component holding node 0 is now the second one
    g2 = Graph.from_edges(7, [(4, 5), (5, 6), (4, 6), (1, 2), (2, 3), (1, 3)])
    assert largest_connected_component(g2).n == 3


def test_lcc_connected_graph_unchanged():
    g = cycle_graph(7)
    assert largest_connected_component(g) == g


def test_lcc_star_plus_edge():
    g = disjoint_union(Graph.from_edges(2, [(0, 1)]), star_graph(4))
    lcc = largest_connected_component(g)
    assert lcc.n == 5 and lcc.num_edges == 4
    assert sorted(lcc.degrees().tolist()) == [1, 1, 1, 1, 4]


def test_lcc_matches_bfs_oracle():
    g = erdos_renyi(60, 0.03, seed=7)
    nb = oracles.adjacency_sets(g.n, g.edges().tolist())
    seen, comps = set(), []
    for s in range(g.n):
        if s in seen:
            continue
        comp, stack = [], [s]
        seen.add(s)
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in nb[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        comps.append(sorted(comp))
    best = max(comps, key=lambda c: (len(c), -c[0]))
    assert largest_connected_component(g) == g.subgraph(best)


def test_average_degree():
    assert average_degree(Graph.empty(5)) == 0
    assert average_degree(cycle_graph(6)) == 2
    # the published citation-graph scale: 2 * 5429 / 2708
    assert round(2 * 5429 / 2708) == 4


def test_triangles_small_cases():
    assert count_triangles(complete_graph(3)) == 1
    assert count_triangles(complete_graph(4)) == 4
    for n in range(3, 9):
        assert count_triangles(complete_graph(n)) == math.comb(n, 3)


def test_triangles_vs_oracle():
    g = erdos_renyi(30, 0.2, seed=11)
    assert count_triangles(g) == oracles.triangles(g.n, g.edges().tolist())


def test_clustering_small_cases():
    c, mean = clustering_coefficients(complete_graph(4))
    assert np.all(c == 1) and mean == 1
    c, _ = clustering_coefficients(path_graph(3))
    assert c[1] == 0


def test_clustering_vs_oracle():
    g = erdos_renyi(30, 0.2, seed=12)
    c, mean = clustering_coefficients(g)
    oc, omean = oracles.clustering(g.n, g.edges().tolist())
    assert np.allclose(c, oc, atol=1e-12, rtol=0)
    assert abs(mean - omean) < 1e-12


def test_jdd_small_cases():
    assert jdd(Graph.from_edges(2, [(0, 1)])).entries == {(1, 1): 1}
    assert jdd(star_graph(3)).entries == {(1, 3): 6}


def test_jdd_vs_oracle():
    g = erdos_renyi(40, 0.15, seed=13)
    assert jdd(g).entries == oracles.jdd(g.n, g.edges().tolist())


@given(graphs())
def test_degree_and_jdd_mass(g):
    assert g.degrees().sum() == 2 * g.num_edges
    assert jdd(g).edge_count() == g.num_edges


@given(graphs(max_n=20), st.integers(0, 2**31))
def test_statistics_invariant_under_relabel(g, seed):
    perm = np.random.default_rng(seed).permutation(g.n)
    h = g.relabel(perm)
    assert count_triangles(h) == count_triangles(g)
    assert jdd(h).entries == jdd(g).entries
    assert clustering_coefficients(h)[1] == pytest.approx(clustering_coefficients(g)[1], abs=1e-12)
    assert sorted(h.degrees()) == sorted(g.degrees())


@given(graphs())
def test_adjacency_invariants(g):
    a = g.to_dense()
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    assert a.sum() == 2 * g.num_edges


def test_generators():
    assert circulant_graph(10, 2).degrees().tolist() == [4] * 10
    g = stochastic_block_model([5, 5], 1.0, 0.0, seed=0)
    assert g.num_edges == 20
    assert erdos_renyi(20, 0.3, seed=5) == erdos_renyi(20, 0.3, seed=5)
