"""Weighted undirected graphs with explicit diagonal mass.

Off-diagonal structure is stored once per unordered pair. Self-interaction is
kept out of the pair list entirely and lives in a per-node diagonal mass d_i,
expressed in half-edge units: a plain self-loop of weight l is stored as
d_i = 2*l. Node strength counts the diagonal in full, strength(i) = d_i plus
the weight of all incident pairs, so aggregating a set of nodes into one
super-node changes individual strengths only through newly internalised pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import FormatError, ValidationError
from .fileio import fmt_num, parse_float, read_table, write_text

__all__ = [
    "WeightedGraph",
    "CommunityAssignment",
    "load_graph",
    "save_graph",
]


class WeightedGraph:
    """Immutable weighted graph over dense node indices with a label table.

    Args:
        node_count: number of nodes, indices 0..node_count-1.
        edges: iterable of (u, v, w) triples with u != v and w > 0. Duplicate
            pairs, in either orientation, are merged by summing weights.
        diagonal_mass: per-node nonnegative diagonal mass d_i (default all 0).
        node_labels: external identifiers, one per node; defaults to the
            decimal index.
    """

    def __init__(self, node_count, edges=(), diagonal_mass=None, node_labels=None):
        n = int(node_count)
        if n < 0:
            raise ValidationError("node_count must be nonnegative")
        self.node_count = n

        if node_labels is None:
            node_labels = tuple(str(i) for i in range(n))
        else:
            node_labels = tuple(str(l) for l in node_labels)
        if len(node_labels) != n:
            raise ValidationError(
                f"expected {n} node labels, got {len(node_labels)}"
            )
        if len(set(node_labels)) != n:
            raise ValidationError("node labels must be unique")
        if any(not l for l in node_labels):
            raise ValidationError("node labels must be non-empty")
        self.node_labels = node_labels

        if diagonal_mass is None:
            diag = np.zeros(n, dtype=float)
        else:
            diag = np.asarray(diagonal_mass, dtype=float).copy()
        if diag.shape != (n,):
            raise ValidationError(f"diagonal_mass must have shape ({n},)")
        if not np.all(np.isfinite(diag)) or np.any(diag < 0):
            raise ValidationError("diagonal masses must be finite and >= 0")

        merged: dict[tuple[int, int], float] = {}
        for u, v, w in edges:
            u = int(u)
            v = int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) out of range for {n} nodes")
            if u == v:
                raise ValidationError(
                    f"self pair on node {u}; self-interaction belongs in diagonal_mass"
                )
            w = float(w)
            if not np.isfinite(w) or w <= 0:
                raise ValidationError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (u, v) if u < v else (v, u)
            merged[key] = merged.get(key, 0.0) + w

        pairs = sorted(merged)
        self.edge_u = np.array([p[0] for p in pairs], dtype=np.int64)
        self.edge_v = np.array([p[1] for p in pairs], dtype=np.int64)
        self.edge_w = np.array([merged[p] for p in pairs], dtype=float)
        self.diagonal_mass = diag
        for arr in (self.edge_u, self.edge_v, self.edge_w, self.diagonal_mass):
            arr.flags.writeable = False

    @property
    def edge_count(self) -> int:
        return len(self.edge_w)

    @cached_property
    def _label_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.node_labels)}

    def index_of(self, label: str) -> int:
        try:
            return self._label_index[label]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric off-diagonal adjacency as CSR. Diagonal mass excluded."""
        n = self.node_count
        rows = np.concatenate([self.edge_u, self.edge_v])
        cols = np.concatenate([self.edge_v, self.edge_u])
        data = np.concatenate([self.edge_w, self.edge_w])
        mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        mat.sort_indices()
        return mat

    def strengths(self) -> np.ndarray:
        """Node strengths d_i + sum of incident pair weights."""
        s = self.diagonal_mass.copy()
        np.add.at(s, self.edge_u, self.edge_w)
        np.add.at(s, self.edge_v, self.edge_w)
        return s

    def strength(self, i: int) -> float:
        if not 0 <= i < self.node_count:
            raise IndexError(f"node index {i} out of range")
        return float(self.strengths()[i])

    def weight(self, i: int, j: int) -> float:
        """Weight of the unordered pair (i, j); 0.0 if absent."""
        if i == j:
            raise ValidationError("pair weight is undefined for i == j; see diagonal_mass")
        return float(self.adjacency[i, j])

    def _pair_map(self) -> dict[tuple[str, str], float]:
        out = {}
        for u, v, w in zip(self.edge_u, self.edge_v, self.edge_w):
            a, b = self.node_labels[u], self.node_labels[v]
            out[(a, b) if a <= b else (b, a)] = w
        return out

    def __eq__(self, other) -> bool:
        # Label-keyed equality: node order is an internal detail.
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        if set(self.node_labels) != set(other.node_labels):
            return False
        mine = {l: d for l, d in zip(self.node_labels, self.diagonal_mass)}
        theirs = {l: d for l, d in zip(other.node_labels, other.diagonal_mass)}
        if mine != theirs:
            return False
        return self._pair_map() == other._pair_map()

    def __hash__(self):
        return hash((self.node_count, self.edge_count))

    def __repr__(self):
        return (
            f"WeightedGraph(nodes={self.node_count}, pairs={self.edge_count}, "
            f"diagonal={float(self.diagonal_mass.sum())})"
        )


@dataclass(frozen=True, eq=False)
class CommunityAssignment:
    """Disjoint community labels in [0, community_count) for every node."""

    labels: np.ndarray
    community_count: int
    community_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        r = self.community_count
        if r < 1:
            raise ValidationError("community_count must be >= 1")
        if labels.ndim != 1:
            raise ValidationError("labels must be a 1-d array")
        if labels.size and (labels.min() < 0 or labels.max() >= r):
            raise ValidationError(f"community labels must lie in [0, {r})")
        seen = np.bincount(labels, minlength=r)
        if np.any(seen == 0):
            missing = int(np.flatnonzero(seen == 0)[0])
            raise ValidationError(f"community {missing} has no members")
        if self.community_labels is not None and len(self.community_labels) != r:
            raise ValidationError("community_labels length must equal community_count")

    @property
    def node_count(self) -> int:
        return len(self.labels)

    def community_name(self, k: int) -> str:
        if self.community_labels is not None:
            return self.community_labels[k]
        return str(k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CommunityAssignment):
            return NotImplemented
        return (
            self.community_count == other.community_count
            and np.array_equal(self.labels, other.labels)
        )

    def __hash__(self):
        return hash((self.community_count, self.labels.tobytes()))


EDGE_HEADER = ("src", "dst", "weight")
DIAGONAL_HEADER = ("node", "diagonal_mass")


def load_graph(edge_path: str | Path, diagonal_path: str | Path | None = None) -> WeightedGraph:
    """Load a graph from an edge list file plus an optional diagonal file.

    Node indices are assigned densely in order of first appearance, scanning
    edge rows before diagonal rows. A diagonal row may introduce a node with
    no incident pairs. Duplicate pair rows are merged by summation; duplicate
    diagonal rows are an error.
    """
    index: dict[str, int] = {}

    def intern(label: str) -> int:
        if label not in index:
            index[label] = len(index)
        return index[label]

    raw_edges: list[tuple[int, int, float]] = []
    for lineno, fields in read_table(edge_path, EDGE_HEADER):
        src, dst, wfield = fields
        if not src or not dst:
            raise FormatError(f"{edge_path}:{lineno}: empty node identifier")
        if src == dst:
            raise FormatError(
                f"{edge_path}:{lineno}: self pair on node {src!r}; "
                "record self-interaction in the diagonal file instead"
            )
        w = parse_float(edge_path, lineno, wfield, "weight")
        if w <= 0:
            raise FormatError(f"{edge_path}:{lineno}: weight must be positive, got {wfield}")
        raw_edges.append((intern(src), intern(dst), w))

    diag_entries: dict[int, float] = {}
    if diagonal_path is not None:
        seen: set[str] = set()
        for lineno, fields in read_table(diagonal_path, DIAGONAL_HEADER):
            label, dfield = fields
            if not label:
                raise FormatError(f"{diagonal_path}:{lineno}: empty node identifier")
            if label in seen:
                raise FormatError(
                    f"{diagonal_path}:{lineno}: duplicate diagonal row for node {label!r}"
                )
            seen.add(label)
            d = parse_float(diagonal_path, lineno, dfield, "diagonal mass")
            if d < 0:
                raise FormatError(
                    f"{diagonal_path}:{lineno}: diagonal mass must be >= 0, got {dfield}"
                )
            diag_entries[intern(label)] = d

    n = len(index)
    diag = np.zeros(n, dtype=float)
    for i, d in diag_entries.items():
        diag[i] = d
    labels = [None] * n
    for label, i in index.items():
        labels[i] = label
    return WeightedGraph(n, raw_edges, diagonal_mass=diag, node_labels=labels)


def save_graph(g: WeightedGraph, edge_path: str | Path, diagonal_path: str | Path) -> None:
    """Write a graph as an edge list plus a diagonal file.

    Edge rows order each pair's labels lexicographically and are sorted by
    (src, dst). The diagonal file lists nodes with positive diagonal mass,
    plus isolated nodes so that a reload reconstructs the full node set.
    """
    edge_rows = []
    for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w):
        a, b = g.node_labels[u], g.node_labels[v]
        if b < a:
            a, b = b, a
        edge_rows.append((a, b, w))
    edge_rows.sort(key=lambda row: (row[0], row[1]))
    lines = ["\t".join(EDGE_HEADER)]
    lines.extend(f"{a}\t{b}\t{fmt_num(w)}" for a, b, w in edge_rows)
    write_text(edge_path, "\n".join(lines) + "\n")

    has_edge = np.zeros(g.node_count, dtype=bool)
    has_edge[g.edge_u] = True
    has_edge[g.edge_v] = True
    diag_rows = [
        (g.node_labels[i], g.diagonal_mass[i])
        for i in range(g.node_count)
        if g.diagonal_mass[i] > 0 or not has_edge[i]
    ]
    diag_rows.sort(key=lambda row: row[0])
    lines = ["\t".join(DIAGONAL_HEADER)]
    lines.extend(f"{label}\t{fmt_num(d)}" for label, d in diag_rows)
    write_text(diagonal_path, "\n".join(lines) + "\n")
