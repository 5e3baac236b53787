"""Link-fraction mixed memberships over a disjoint community partition.

The raw membership of node i in community k is the weight of i's pairs into
members of k, counting own diagonal mass at half value toward the node's own
community:

    M_i(k) = sum over j in C_k, j != i, of w_ij   (+ d_i / 2 if c(i) = k)

Row masses therefore equal strength(i) - d_i / 2, the halved self-mass
strength, which is also the row sum of the operator matrix A' used by the
diffusion form. Raw memberships add up under aggregation: summing M over the
members of a set reproduces the aggregated super-node's M exactly under the
lifted partition, for any partition of the sets.

Two normalisations are provided. Unit shares divide each row by its mass.
The aggregate normalisation additionally multiplies row x by the set size
so that a set of s interchangeable people carries s units of membership.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregate import AggregationMap, aggregate, lift_communities
from .errors import ConfigError, ValidationError
from .graph import CommunityAssignment, WeightedGraph

__all__ = [
    "MembershipMatrix",
    "community_indicator",
    "raw_membership",
    "membership_by_matrix",
    "normalize_node",
    "normalize_aggregate",
    "diffusion_membership",
    "conservation_check",
    "ConservationReport",
    "MEMBERSHIP_KINDS",
]

MEMBERSHIP_KINDS = ("raw", "node-normalized", "aggregate-normalized", "diffusion")

MAX_DIFFUSION_STEPS = 32


@dataclass(frozen=True, eq=False)
class MembershipMatrix:
    """A nodes-by-communities membership table.

    zero_rows lists nodes whose raw mass was zero; their rows are all zero in
    every kind and any diversity statistic downstream is reported as missing.
    """

    values: np.ndarray
    kind: str
    community_labels: tuple[str, ...] | None = None
    zero_rows: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.kind not in MEMBERSHIP_KINDS:
            raise ConfigError(f"unknown membership kind {self.kind!r}")
        if values.ndim != 2:
            raise ValidationError("membership values must be a 2-d array")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError("membership values must be finite and >= 0")
        if self.community_labels is not None and len(self.community_labels) != values.shape[1]:
            raise ValidationError("community_labels length must match column count")

    @property
    def node_count(self) -> int:
        return self.values.shape[0]

    @property
    def community_count(self) -> int:
        return self.values.shape[1]


def community_indicator(c: CommunityAssignment) -> np.ndarray:
    """Dense one-hot indicator with one 1 per row."""
    ind = np.zeros((c.node_count, c.community_count), dtype=float)
    ind[np.arange(c.node_count), c.labels] = 1.0
    return ind


def _check_partition(g: WeightedGraph, c: CommunityAssignment) -> None:
    if c.node_count != g.node_count:
        raise ValidationError(
            f"partition labels {c.node_count} nodes, graph has {g.node_count}"
        )


def raw_membership(g: WeightedGraph, c: CommunityAssignment) -> MembershipMatrix:
    """Raw membership by direct summation over the pair list."""
    _check_partition(g, c)
    n, r = g.node_count, c.community_count
    m = np.zeros((n, r), dtype=float)
    lab = c.labels
    np.add.at(m, (g.edge_u, lab[g.edge_v]), g.edge_w)
    np.add.at(m, (g.edge_v, lab[g.edge_u]), g.edge_w)
    m[np.arange(n), lab] += g.diagonal_mass / 2.0
    zero = tuple(int(i) for i in np.flatnonzero(m.sum(axis=1) == 0.0))
    return MembershipMatrix(m, "raw", c.community_labels, zero)


def membership_by_matrix(g: WeightedGraph, c: CommunityAssignment) -> MembershipMatrix:
    """Raw membership as the product A'C of the operator matrix with the
    community indicator. Agrees with raw_membership to rounding error and
    serves as its cross-check."""
    _check_partition(g, c)
    ind = community_indicator(c)
    m = g.adjacency @ ind
    m += (g.diagonal_mass / 2.0)[:, None] * ind
    zero = tuple(int(i) for i in np.flatnonzero(m.sum(axis=1) == 0.0))
    return MembershipMatrix(m, "raw", c.community_labels, zero)


def _require_raw(m: MembershipMatrix, op: str) -> None:
    if m.kind != "raw":
        raise ConfigError(f"{op} expects a raw membership matrix, got kind {m.kind!r}")


def normalize_node(m: MembershipMatrix) -> MembershipMatrix:
    """Unit shares: each row divided by its mass. Zero rows stay zero."""
    _require_raw(m, "normalize_node")
    mass = m.values.sum(axis=1)
    safe = np.where(mass > 0, mass, 1.0)
    values = m.values / safe[:, None]
    values[mass == 0] = 0.0
    zero = tuple(int(i) for i in np.flatnonzero(mass == 0.0))
    return MembershipMatrix(values, "node-normalized", m.community_labels, zero)


def normalize_aggregate(m: MembershipMatrix, set_sizes) -> MembershipMatrix:
    """Set-size weighted shares: row x scaled to sum to |S_x|."""
    _require_raw(m, "normalize_aggregate")
    sizes = np.asarray(set_sizes, dtype=float)
    if sizes.shape != (m.node_count,):
        raise ValidationError(
            f"expected {m.node_count} set sizes, got shape {sizes.shape}"
        )
    if np.any(sizes < 1):
        raise ValidationError("set sizes must be >= 1")
    mass = m.values.sum(axis=1)
    safe = np.where(mass > 0, mass, 1.0)
    values = m.values * (sizes / safe)[:, None]
    values[mass == 0] = 0.0
    zero = tuple(int(i) for i in np.flatnonzero(mass == 0.0))
    return MembershipMatrix(values, "aggregate-normalized", m.community_labels, zero)


def _apply_operator(g: WeightedGraph, x: np.ndarray) -> np.ndarray:
    """Multiply A' (pair weights off-diagonal, d/2 on it) against an n-by-r
    block, accumulating in the same order as raw_membership so that the two
    agree bit for bit on an indicator block."""
    out = np.zeros_like(x)
    np.add.at(out, g.edge_u, g.edge_w[:, None] * x[g.edge_v])
    np.add.at(out, g.edge_v, g.edge_w[:, None] * x[g.edge_u])
    out += (g.diagonal_mass / 2.0)[:, None] * x
    return out


def diffusion_membership(g: WeightedGraph, c: CommunityAssignment, t: int) -> MembershipMatrix:
    """t-step diffusion shares m = P^t C with P = D^-1 A'.

    A' carries pair weights off the diagonal and d_i / 2 on it; D holds the
    row sums of A'. P^t C is computed by t operator applications against the
    n-by-r indicator, never forming P^t. At t = 1 this reproduces the
    unit-share normalisation of the raw membership exactly.
    """
    _check_partition(g, c)
    t = int(t)
    if t < 1:
        raise ConfigError("diffusion step count must be >= 1")
    if t > MAX_DIFFUSION_STEPS:
        raise ConfigError(f"diffusion step count capped at {MAX_DIFFUSION_STEPS}, got {t}")
    x = _apply_operator(g, community_indicator(c))
    # Row sums of A'C equal the A' row masses because indicator rows sum to 1.
    row_mass = x.sum(axis=1)
    if np.any(row_mass <= 0):
        label = g.node_labels[int(np.flatnonzero(row_mass <= 0)[0])]
        raise ValidationError(f"node {label!r} has zero strength; diffusion undefined")
    x = x / row_mass[:, None]
    for _ in range(t - 1):
        x = _apply_operator(g, x) / row_mass[:, None]
    return MembershipMatrix(x, "diffusion", c.community_labels, ())


@dataclass(frozen=True)
class ConservationReport:
    """Pointwise comparison of the two routes to aggregated raw membership.

    direct:  raw membership computed on the aggregated graph.
    summed:  per-set sums of fine-level raw membership under the lifted
             partition.
    scale:   largest aggregated node strength, the reference for relative
             tolerances.
    """

    set_labels: tuple[str, ...]
    community_names: tuple[str, ...]
    direct: np.ndarray
    summed: np.ndarray
    max_abs_discrepancy: float
    scale: float

    def max_relative_discrepancy(self) -> float:
        return self.max_abs_discrepancy / self.scale

    def passes(self, relative_tolerance: float = 1e-9) -> bool:
        return self.max_abs_discrepancy <= relative_tolerance * self.scale


def conservation_check(
    g: WeightedGraph,
    a: AggregationMap,
    c_sets: CommunityAssignment,
    aggregated: WeightedGraph | None = None,
) -> ConservationReport:
    """Compare aggregated raw membership against summed fine membership.

    When an externally stored aggregated graph is supplied it is verified in
    place of the recomputed one; its node labels must be the map's set
    identifiers.
    """
    if a.node_count != g.node_count:
        raise ValidationError(
            f"aggregation map covers {a.node_count} nodes, graph has {g.node_count}"
        )
    if c_sets.node_count != a.set_count:
        raise ValidationError(
            f"partition labels {c_sets.node_count} sets, map has {a.set_count}"
        )
    set_labels = tuple(a.set_name(x) for x in range(a.set_count))
    if aggregated is None:
        g_agg = aggregate(g, a)
        direct = raw_membership(g_agg, c_sets).values
    else:
        g_agg = aggregated
        if set(g_agg.node_labels) != set(set_labels):
            raise ValidationError(
                "aggregated graph labels do not match the map's set identifiers"
            )
        # order[x] is the supplied graph's node index for map set x.
        order = np.array([g_agg.index_of(s) for s in set_labels], dtype=np.int64)
        labels_on_agg = np.empty(a.set_count, dtype=np.int64)
        labels_on_agg[order] = c_sets.labels
        c_on_agg = CommunityAssignment(
            labels_on_agg, c_sets.community_count, c_sets.community_labels
        )
        direct = raw_membership(g_agg, c_on_agg).values[order]

    fine = raw_membership(g, lift_communities(c_sets, a)).values
    summed = np.zeros((a.set_count, c_sets.community_count), dtype=float)
    np.add.at(summed, a.assignment, fine)

    diff = float(np.abs(direct - summed).max()) if direct.size else 0.0
    strengths = g_agg.strengths()
    scale = float(strengths.max()) if strengths.size and strengths.max() > 0 else 1.0
    names = tuple(c_sets.community_name(k) for k in range(c_sets.community_count))
    return ConservationReport(set_labels, names, direct, summed, diff, scale)
