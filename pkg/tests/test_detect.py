import numpy as np
import pytest

import networkx as nx

from conftest import quality_oracle, random_graph, set_partitions

from lfmm import (
    AggregationMap,
    CommunityAssignment,
    ConfigError,
    DetectConfig,
    ValidationError,
    WeightedGraph,
    aggregate,
    leiden,
    load_partition,
    rb_quality,
    save_partition,
)
from lfmm.detect import _leiden_with_trace


def _assignment(labels):
    labels = np.asarray(labels)
    return CommunityAssignment(labels, int(labels.max()) + 1)


def test_quality_g4_pair_split(g4, g4_communities):
    # 2W = 16; internal masses 2+2=4 and 3+0=3; K = 9 and 7
    assert rb_quality(g4, g4_communities) == pytest.approx(0.3671875, abs=1e-15)


def test_quality_matches_dense_oracle_random():
    rng = np.random.default_rng(13)
    for _ in range(30):
        n = int(rng.integers(2, 40))
        g = random_graph(rng, n, density=0.4, with_diagonal=True)
        labels = rng.integers(0, max(1, n // 2), n)
        labels[0] = 0
        c = _assignment(np.unique(labels, return_inverse=True)[1])
        gamma = float(rng.uniform(0.2, 3.0))
        assert rb_quality(g, c, gamma) == pytest.approx(
            quality_oracle(g, c.labels, gamma), rel=1e-10, abs=1e-12
        )


def test_quality_rejects_massless_graph():
    g = WeightedGraph(3)
    with pytest.raises(ValidationError, match="no mass"):
        rb_quality(g, _assignment([0, 0, 0]))


def test_quality_resolution_shifts_optimum(two_cliques):
    split = _assignment([0] * 4 + [1] * 4)
    merged = _assignment([0] * 8)
    assert rb_quality(two_cliques, split, 1.0) == pytest.approx(0.5)
    # at zero-ish resolution merging is harmless, at high resolution costly
    assert rb_quality(two_cliques, merged, 0.01) > rb_quality(two_cliques, merged, 2.0)


def test_leiden_g4_is_exhaustively_optimal(g4):
    best_q = -np.inf
    best = None
    for labels in set_partitions(4):
        q = quality_oracle(g4, labels)
        if q > best_q:
            best_q, best = q, labels
    assert best_q == pytest.approx(0.3671875, abs=1e-15)
    assert np.array_equal(best, [0, 0, 1, 1])
    found = leiden(g4)
    assert np.array_equal(found.labels, best)
    assert rb_quality(g4, found) == pytest.approx(best_q, abs=1e-15)


def test_leiden_two_cliques_exhaustive(two_cliques):
    best_q = max(quality_oracle(two_cliques, labels) for labels in set_partitions(8))
    found = leiden(two_cliques)
    assert found.community_count == 2
    assert len(set(found.labels[:4])) == 1
    assert len(set(found.labels[4:])) == 1
    assert rb_quality(two_cliques, found) == pytest.approx(best_q, abs=1e-12)
    assert best_q == pytest.approx(0.5, abs=1e-12)


def test_leiden_deterministic_per_seed():
    rng = np.random.default_rng(23)
    for trial in range(5):
        n = int(rng.integers(10, 60))
        g = random_graph(rng, n, density=0.2, with_diagonal=True)
        cfg = DetectConfig(seed=trial)
        a = leiden(g, cfg)
        b = leiden(g, cfg)
        assert np.array_equal(a.labels, b.labels)
        assert a.community_count == b.community_count


def test_leiden_trace_is_monotone():
    rng = np.random.default_rng(29)
    for trial in range(8):
        n = int(rng.integers(10, 80))
        g = random_graph(rng, n, density=0.15, with_diagonal=True)
        _, trace = _leiden_with_trace(g, DetectConfig(seed=trial))
        assert len(trace) >= 1
        diffs = np.diff(np.asarray(trace))
        assert np.all(diffs >= -1e-9), trace


def test_leiden_beats_trivial_partitions():
    rng = np.random.default_rng(31)
    for trial in range(6):
        n = int(rng.integers(8, 50))
        g = random_graph(rng, n, density=0.25)
        found = leiden(g, DetectConfig(seed=trial))
        q = rb_quality(g, found)
        q_single = rb_quality(g, _assignment(np.zeros(n, dtype=int)))
        q_atoms = rb_quality(g, _assignment(np.arange(n)))
        assert q >= q_single - 1e-12
        assert q >= q_atoms - 1e-12


def test_leiden_communities_are_connected():
    rng = np.random.default_rng(37)
    for trial in range(8):
        n = int(rng.integers(10, 70))
        g = random_graph(rng, n, density=0.08, with_diagonal=True)
        found = leiden(g, DetectConfig(seed=trial))
        nxg = nx.Graph()
        nxg.add_nodes_from(range(n))
        nxg.add_edges_from(zip(g.edge_u.tolist(), g.edge_v.tolist()))
        for k in range(found.community_count):
            members = np.flatnonzero(found.labels == k)
            sub = nxg.subgraph(members.tolist())
            assert nx.is_connected(sub), f"community {k} disconnected"


def test_leiden_labels_compact_in_node_order():
    rng = np.random.default_rng(41)
    g = random_graph(rng, 30, density=0.15)
    found = leiden(g)
    seen = []
    for lab in found.labels:
        if lab not in seen:
            seen.append(lab)
    assert seen == list(range(found.community_count))


def test_high_resolution_forces_singletons(two_cliques):
    found = leiden(two_cliques, DetectConfig(resolution=100.0))
    assert found.community_count == 8


def test_leiden_on_aggregated_cliques(two_cliques):
    blocks = AggregationMap(np.array([0, 0, 0, 0, 1, 1, 1, 1]), 2)
    agg = aggregate(two_cliques, blocks)
    found = leiden(agg)
    assert found.community_count == 2


def test_detect_config_validation():
    with pytest.raises(ConfigError):
        DetectConfig(resolution=0.0)
    with pytest.raises(ConfigError):
        DetectConfig(resolution=float("nan"))
    with pytest.raises(ConfigError):
        DetectConfig(max_passes=0)


def test_partition_round_trip(tmp_path, g4, g4_communities):
    path = tmp_path / "part.tsv"
    save_partition(g4_communities, g4, path)
    text = path.read_text()
    assert text.splitlines()[0] == "node\tcommunity"
    back = load_partition(path, g4)
    assert np.array_equal(back.labels, g4_communities.labels)
    assert back.community_labels == ("A", "B")


def test_save_partition_orders_rows_by_label(tmp_path):
    g = WeightedGraph(3, edges=[(0, 1, 1.0), (1, 2, 1.0)], node_labels=("b", "c", "a"))
    c = CommunityAssignment(np.array([0, 1, 1]), 2)
    path = tmp_path / "part.tsv"
    save_partition(c, g, path)
    rows = path.read_text().splitlines()[1:]
    assert [r.split("\t")[0] for r in rows] == ["a", "b", "c"]
