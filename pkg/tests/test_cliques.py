import networkx as nx
from hypothesis import given, strategies as st

from hauscover.cliques import maximal_cliques, threshold_adjacency


def adjacency(n, edges):
    adj = {i: 0 for i in range(n)}
    for i, j in edges:
        adj[i] |= 1 << j
        adj[j] |= 1 << i
    return adj


@given(st.integers(1, 14), st.lists(st.tuples(st.integers(0, 13), st.integers(0, 13)), max_size=60))
def test_matches_networkx(n, raw):
    edges = {(min(i, j), max(i, j)) for i, j in raw if i != j and i < n and j < n}
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    expected = {sum(1 << v for v in c) for c in nx.find_cliques(G)}
    got = set(maximal_cliques(adjacency(n, edges), (1 << n) - 1))
    assert got == expected


def test_threshold_adjacency_triangle():
    D = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    adj = threshold_adjacency(D, [0, 1, 2], 1)
    assert list(maximal_cliques(adj, 0b111)) == [0b111]
    adj0 = threshold_adjacency(D, [0, 1, 2], 0)
    assert sorted(maximal_cliques(adj0, 0b111)) == [1, 2, 4]
