import numpy as np
import pytest

from lfmm import AggregationMap, CommunityAssignment, WeightedGraph

# The 4-node path fixture used throughout: 1-2 (w=2), 2-3 (w=1), 3-4 (w=3),
# node 1 carrying diagonal mass 4. Raw membership under A={1,2}, B={3,4}
# is [[4,0],[2,1],[1,3],[0,3]]; collapsing the pairs gives [[6,1],[1,6]].


@pytest.fixture
def g4():
    return WeightedGraph(
        4,
        edges=[(0, 1, 2.0), (1, 2, 1.0), (2, 3, 3.0)],
        diagonal_mass=[4.0, 0.0, 0.0, 0.0],
        node_labels=("1", "2", "3", "4"),
    )


@pytest.fixture
def g4_communities():
    return CommunityAssignment(np.array([0, 0, 1, 1]), 2, community_labels=("A", "B"))


@pytest.fixture
def g4_map():
    return AggregationMap(np.array([0, 0, 1, 1]), 2, set_labels=("X", "Y"))


@pytest.fixture
def two_cliques():
    edges = []
    for base in (0, 4):
        for i in range(4):
            for j in range(i + 1, 4):
                edges.append((base + i, base + j, 1.0))
    return WeightedGraph(8, edges=edges)


def random_graph(rng, n, density=0.3, max_weight=5.0, with_diagonal=False):
    """Random connected-ish weighted graph for property tests."""
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges.append((i, j, float(rng.uniform(0.1, max_weight))))
    if not edges and n >= 2:
        edges.append((0, 1, 1.0))
    diag = rng.uniform(0.0, max_weight, n) * rng.integers(0, 2, n) if with_diagonal else None
    return WeightedGraph(n, edges=edges, diagonal_mass=diag)


def random_assignment(rng, n, r):
    r = min(r, n)
    labels = rng.integers(0, r, n)
    labels[rng.permutation(n)[:r]] = np.arange(r)  # every community occupied
    return CommunityAssignment(labels, r)


def random_map(rng, n, s):
    s = min(s, n)
    labels = rng.integers(0, s, n)
    labels[rng.permutation(n)[:s]] = np.arange(s)
    return AggregationMap(labels, s)


def set_partitions(n):
    """All partitions of range(n) as label arrays with dense indices."""
    if n == 0:
        return
    labels = np.zeros(n, dtype=np.int64)

    def rec(i, used):
        if i == n:
            yield labels.copy()
            return
        for k in range(used + 1):
            labels[i] = k
            yield from rec(i + 1, max(used, k + 1))

    yield from rec(1, 1)


def quality_oracle(g, labels, gamma=1.0):
    """Dense independent route to the detection objective.

    S has pair weights off the diagonal and the full diagonal mass on it;
    then Q = sum over same-community ordered pairs of
    (S_ij - gamma * s_i * s_j / 2W) / 2W.
    """
    n = g.node_count
    s_mat = np.zeros((n, n))
    for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w):
        s_mat[u, v] += w
        s_mat[v, u] += w
    s_mat[np.diag_indices(n)] = g.diagonal_mass
    strengths = s_mat.sum(axis=1)
    two_w = strengths.sum()
    same = labels[:, None] == labels[None, :]
    return float(np.sum((s_mat - gamma * np.outer(strengths, strengths) / two_w)[same]) / two_w)
