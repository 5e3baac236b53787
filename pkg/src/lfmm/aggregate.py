"""Aggregation of nodes into sets, with membership-conserving diagonals.

When a set S_x collapses into one super-node, pair weight between distinct
sets is plain summation. The super-node's diagonal mass is

    d'_x = 4 * W_e(S_x) + sum of member diagonals,

where W_e(S_x) is the total weight over unordered internal pairs. With this
choice the raw membership of the super-node equals, community by community,
the summed raw memberships of its members, exactly and for every partition
of the sets. The literal half-edge count within a set, 2 * W_e + sum of
member diagonals, does not have that property; it is available separately
through half_edge_counts for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import FormatError, ValidationError
from .fileio import read_table
from .graph import CommunityAssignment, WeightedGraph

__all__ = [
    "AggregationMap",
    "aggregate",
    "half_edge_counts",
    "lift_communities",
    "compose",
    "load_aggregation_map",
]


@dataclass(frozen=True, eq=False)
class AggregationMap:
    """Assignment of fine nodes to set indices in [0, set_count).

    Every set must receive at least one node.
    """

    assignment: np.ndarray
    set_count: int
    set_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        assignment.flags.writeable = False
        object.__setattr__(self, "assignment", assignment)
        if assignment.ndim != 1:
            raise ValidationError("assignment must be a 1-d array")
        s = self.set_count
        if s < 1:
            raise ValidationError("set_count must be >= 1")
        if assignment.size == 0:
            raise ValidationError("aggregation map needs at least one node")
        if assignment.min() < 0 or assignment.max() >= s:
            raise ValidationError(f"set indices must lie in [0, {s})")
        sizes = np.bincount(assignment, minlength=s)
        if np.any(sizes == 0):
            empty = int(np.flatnonzero(sizes == 0)[0])
            raise ValidationError(f"set {empty} has no members")
        if self.set_labels is not None and len(self.set_labels) != s:
            raise ValidationError("set_labels length must equal set_count")

    @property
    def node_count(self) -> int:
        return len(self.assignment)

    @property
    def set_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.set_count)

    def set_name(self, x: int) -> str:
        if self.set_labels is not None:
            return self.set_labels[x]
        return f"set_{x}"

    @classmethod
    def identity(cls, g: WeightedGraph) -> "AggregationMap":
        """Singleton map sending each node to its own set, keeping node labels."""
        return cls(np.arange(g.node_count), g.node_count, set_labels=g.node_labels)

    def __eq__(self, other):
        if not isinstance(other, AggregationMap):
            return NotImplemented
        return (
            self.set_count == other.set_count
            and np.array_equal(self.assignment, other.assignment)
        )

    def __hash__(self):
        return hash((self.set_count, self.assignment.tobytes()))


def _set_internal_weights(g: WeightedGraph, a: AggregationMap):
    """Per-set internal unordered-pair weight W_e and member diagonal sums."""
    x = a.assignment
    xu = x[g.edge_u]
    xv = x[g.edge_v]
    internal = xu == xv
    we = np.bincount(xu[internal], weights=g.edge_w[internal], minlength=a.set_count)
    dsum = np.bincount(x, weights=g.diagonal_mass, minlength=a.set_count)
    return we, dsum, xu, xv, internal


def aggregate(g: WeightedGraph, a: AggregationMap) -> WeightedGraph:
    """Collapse each set into a super-node.

    Cross-set pair weights sum; diagonals follow the membership-conserving
    convention d'_x = 4 * W_e(S_x) + sum of member diagonals. Output node
    labels are the map's set identifiers.
    """
    if a.node_count != g.node_count:
        raise ValidationError(
            f"aggregation map covers {a.node_count} nodes, graph has {g.node_count}"
        )
    we, dsum, xu, xv, internal = _set_internal_weights(g, a)
    d_agg = 4.0 * we + dsum

    cross = ~internal
    lo = np.minimum(xu[cross], xv[cross])
    hi = np.maximum(xu[cross], xv[cross])
    s = a.set_count
    coo = sp.coo_matrix((g.edge_w[cross], (lo, hi)), shape=(s, s))
    coo.sum_duplicates()
    edges = zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())
    labels = a.set_labels if a.set_labels is not None else tuple(
        f"set_{i}" for i in range(s)
    )
    return WeightedGraph(s, edges, diagonal_mass=d_agg, node_labels=labels)


def half_edge_counts(g: WeightedGraph, a: AggregationMap) -> np.ndarray:
    """Literal half-edge count within each set: 2 * W_e + member diagonals.

    Diagnostic only. Using this as the aggregated diagonal would preserve
    strengths but break membership conservation.
    """
    if a.node_count != g.node_count:
        raise ValidationError(
            f"aggregation map covers {a.node_count} nodes, graph has {g.node_count}"
        )
    we, dsum, _, _, _ = _set_internal_weights(g, a)
    return 2.0 * we + dsum


def lift_communities(c: CommunityAssignment, a: AggregationMap) -> CommunityAssignment:
    """Pull a partition of the sets back to the fine nodes through the map."""
    if c.node_count != a.set_count:
        raise ValidationError(
            f"partition labels {c.node_count} sets, map has {a.set_count}"
        )
    return CommunityAssignment(
        labels=c.labels[a.assignment],
        community_count=c.community_count,
        community_labels=c.community_labels,
    )


def compose(outer: AggregationMap, inner: AggregationMap) -> AggregationMap:
    """Map fine nodes through inner then outer. aggregate(g, compose(q, p))
    equals aggregate(aggregate(g, p), q)."""
    if outer.node_count != inner.set_count:
        raise ValidationError(
            f"outer map covers {outer.node_count} nodes, inner produces {inner.set_count} sets"
        )
    return AggregationMap(
        assignment=outer.assignment[inner.assignment],
        set_count=outer.set_count,
        set_labels=outer.set_labels,
    )


PARTITION_HEADERS = (("node", "set_id"), ("node", "community"))


def read_node_labeling(path: str | Path, g: WeightedGraph):
    """Parse a two-column node grouping file against a graph.

    Accepts header 'node<TAB>set_id' or 'node<TAB>community'. Returns
    (group_index_per_node, group_labels) with group indices dense in order
    of first appearance. Every graph node must appear exactly once and every
    row must name a graph node.
    """
    last_err = None
    for header in PARTITION_HEADERS:
        try:
            rows = read_table(path, header)
            break
        except FormatError as err:
            last_err = err
    else:
        raise last_err
    assignment = np.full(g.node_count, -1, dtype=np.int64)
    group_index: dict[str, int] = {}
    for lineno, (node, group) in rows:
        if not node or not group:
            raise FormatError(f"{path}:{lineno}: empty identifier")
        try:
            i = g.index_of(node)
        except KeyError:
            raise FormatError(f"{path}:{lineno}: unknown node {node!r}") from None
        if assignment[i] != -1:
            raise FormatError(f"{path}:{lineno}: duplicate row for node {node!r}")
        if group not in group_index:
            group_index[group] = len(group_index)
        assignment[i] = group_index[group]
    if np.any(assignment == -1):
        missing = g.node_labels[int(np.flatnonzero(assignment == -1)[0])]
        raise FormatError(f"{path}: node {missing!r} has no row")
    labels = [None] * len(group_index)
    for name, idx in group_index.items():
        labels[idx] = name
    return assignment, tuple(labels)


def load_aggregation_map(path: str | Path, g: WeightedGraph) -> AggregationMap:
    """Load a node-to-set map from a partition file, keyed to a graph."""
    assignment, labels = read_node_labeling(path, g)
    return AggregationMap(assignment, len(labels), set_labels=labels)
