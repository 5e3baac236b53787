"""Planted-partition benchmarks for the aggregation-consistency pipeline.

generate_sbm draws an undirected unit-weight planted-partition graph with a
configurable expected external edge fraction mu, plus a node-to-set
aggregation map that is community-aligned with probability 1 - mixing and
uniformly random otherwise.

run_consistency_experiment reproduces the three-way scatter comparison:
summed member memberships against the aggregated super-node memberships for
raw and unit-share normalised values, and against detection performed on the
individual-level graph. run_heatmap_experiment sweeps (mu, mixing) and
records the mean unit-share membership that sets place outside their own
detected community.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .aggregate import AggregationMap, aggregate, lift_communities
from .detect import DetectConfig, leiden
from .errors import ConfigError, ValidationError
from .graph import CommunityAssignment, WeightedGraph
from .membership import normalize_aggregate, normalize_node, raw_membership

__all__ = [
    "SbmConfig",
    "generate_sbm",
    "pearson",
    "nmi",
    "ConsistencyResult",
    "run_consistency_experiment",
    "HeatmapResult",
    "run_heatmap_experiment",
]


@dataclass(frozen=True)
class SbmConfig:
    """Benchmark settings.

    mu is the expected fraction of a node's edges that leave its community;
    mixing is the probability that a node is assigned to a uniformly random
    set instead of one aligned with its community.
    """

    nodes: int = 1000
    communities: int = 2
    mean_degree: float = 20.0
    mu: float = 0.05
    n_sets: int = 50
    mixing: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.communities < 1:
            raise ConfigError("need at least one community")
        if self.nodes < self.communities:
            raise ConfigError("need at least one node per community")
        if not 0 <= self.mu <= 1:
            raise ConfigError(f"mu must lie in [0, 1], got {self.mu}")
        if not 0 <= self.mixing <= 1:
            raise ConfigError(f"mixing must lie in [0, 1], got {self.mixing}")
        if self.n_sets < 1 or self.n_sets % self.communities != 0:
            raise ConfigError(
                f"n_sets must be a positive multiple of communities, got {self.n_sets}"
            )
        if self.n_sets > self.nodes:
            raise ConfigError(
                f"{self.n_sets} sets cannot all be occupied by {self.nodes} nodes"
            )
        if not self.mean_degree > 0:
            raise ConfigError("mean_degree must be > 0")
        self.edge_probabilities()  # feasibility check

    def edge_probabilities(self) -> tuple[float, float]:
        """(p_in, p_out) hitting the configured mean degree and mu."""
        block = self.nodes / self.communities
        if block <= 1:
            raise ConfigError("blocks of one node cannot carry internal edges")
        k = self.mean_degree
        lo = max(0.0, 1.0 - (block - 1) / k)
        hi = min(1.0, (self.nodes - block) / k) if self.communities > 1 else 0.0
        if self.communities == 1:
            if self.mu != 0:
                raise ConfigError("mu must be 0 with a single community")
            p_in = k / (block - 1)
            if p_in > 1:
                raise ConfigError("mean_degree too large for a single block")
            return p_in, 0.0
        if not lo <= self.mu <= hi:
            raise ConfigError(
                f"mu={self.mu} is infeasible for these sizes; "
                f"feasible range is [{lo:.6g}, {hi:.6g}]"
            )
        p_in = (1.0 - self.mu) * k / (block - 1)
        p_out = self.mu * k / (self.nodes - block)
        return p_in, p_out


def generate_sbm(cfg: SbmConfig) -> tuple[WeightedGraph, CommunityAssignment, AggregationMap]:
    """Sample a benchmark instance: graph, planted partition, aggregation map.

    Edges have unit weight and diagonals are zero. Deterministic for a fixed
    seed. Set assignment is redrawn wholesale in the rare event a set would
    come out empty, keeping the draw deterministic.
    """
    rng = np.random.default_rng(cfg.seed)
    n, r = cfg.nodes, cfg.communities
    p_in, p_out = cfg.edge_probabilities()

    sizes = np.full(r, n // r, dtype=np.int64)
    sizes[: n % r] += 1
    planted = np.repeat(np.arange(r), sizes)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(planted[iu] == planted[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = zip(iu[keep].tolist(), ju[keep].tolist(), [1.0] * int(keep.sum()))
    g = WeightedGraph(n, edges)

    aligned_per_comm = cfg.n_sets // r
    while True:
        uniform = rng.random(n) < cfg.mixing
        aligned_pick = planted * aligned_per_comm + rng.integers(0, aligned_per_comm, size=n)
        uniform_pick = rng.integers(0, cfg.n_sets, size=n)
        assignment = np.where(uniform, uniform_pick, aligned_pick)
        if np.bincount(assignment, minlength=cfg.n_sets).min() > 0:
            break
    amap = AggregationMap(assignment, cfg.n_sets)
    return g, CommunityAssignment(planted, r), amap


def pearson(xs, ys) -> float:
    """Pearson correlation; rejects degenerate constant inputs."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson expects two 1-d arrays of equal length")
    if len(x) < 2:
        raise ValidationError("pearson needs at least 2 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("pearson inputs must be finite")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValidationError("pearson undefined for zero-variance input")
    return float(np.corrcoef(x, y)[0, 1])


def nmi(a: CommunityAssignment, b: CommunityAssignment) -> float:
    """Mutual information normalised by the arithmetic mean of the entropies.

    Two single-community partitions are identical and score 1.
    """
    if a.node_count != b.node_count:
        raise ValidationError("partitions must cover the same nodes")
    if a.node_count == 0:
        raise ValidationError("nmi undefined for empty partitions")
    n = a.node_count
    contingency = np.zeros((a.community_count, b.community_count), dtype=float)
    np.add.at(contingency, (a.labels, b.labels), 1.0)
    pij = contingency / n
    pa = pij.sum(axis=1)
    pb = pij.sum(axis=0)
    nz = pij > 0
    mutual = float(np.sum(pij[nz] * np.log(pij[nz] / np.outer(pa, pb)[nz])))
    ha = float(-np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    hb = float(-np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    if ha + hb == 0:
        return 1.0
    return float(min(max(2.0 * mutual / (ha + hb), 0.0), 1.0))


def _per_set_sums(values: np.ndarray, amap: AggregationMap) -> np.ndarray:
    out = np.zeros((amap.set_count, values.shape[1]), dtype=float)
    np.add.at(out, amap.assignment, values)
    return out


@dataclass(frozen=True)
class ConsistencyResult:
    """Scatter data for one benchmark instance.

    Rows are (set, community) pairs. 'raw' compares summed member raw
    membership (x) with the super-node raw membership (y); 'normalized'
    compares summed unit shares with the size-weighted aggregate shares;
    'individual' swaps the x side for sums under individual-level detection,
    with detected communities folded onto the aggregate-level ones by
    maximum node overlap. minority_bias is the mean over sets of aggregate
    minority mass minus individual-detection minority mass, where minority
    means membership outside the set's own detected community.
    """

    set_labels: tuple[str, ...]
    community_count: int
    sums_raw: np.ndarray
    agg_raw: np.ndarray
    sums_norm: np.ndarray
    agg_norm: np.ndarray
    sums_individual: np.ndarray
    correlations: dict[str, float]
    minority_bias: float

    def series(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {
            "raw": (self.sums_raw, self.agg_raw),
            "normalized": (self.sums_norm, self.agg_norm),
            "individual": (self.sums_individual, self.agg_raw),
        }


def run_consistency_experiment(
    cfg: SbmConfig, resolution: float = 1.0
) -> ConsistencyResult:
    """Generate one instance and compute the three scatter series."""
    g, _, amap = generate_sbm(cfg)
    g_agg = aggregate(g, amap)
    dcfg = DetectConfig(resolution=resolution, seed=cfg.seed)
    c_agg = leiden(g_agg, dcfg)
    lifted = lift_communities(c_agg, amap)
    r = c_agg.community_count
    n_sets = amap.set_count

    fine_raw = raw_membership(g, lifted)
    sums_raw = _per_set_sums(fine_raw.values, amap)
    agg_raw = raw_membership(g_agg, c_agg).values
    sums_norm = _per_set_sums(normalize_node(fine_raw).values, amap)
    agg_norm = normalize_aggregate(
        raw_membership(g_agg, c_agg), amap.set_sizes
    ).values

    c_ind = leiden(g, dcfg)
    overlap = np.zeros((c_ind.community_count, r), dtype=float)
    np.add.at(overlap, (c_ind.labels, lifted.labels), 1.0)
    fold = overlap.argmax(axis=1)  # ties resolve to the lowest aggregate index
    m_ind = raw_membership(g, c_ind).values
    folded = np.zeros((g.node_count, r), dtype=float)
    for k in range(c_ind.community_count):
        folded[:, fold[k]] += m_ind[:, k]
    sums_individual = _per_set_sums(folded, amap)

    correlations = {
        "raw": pearson(sums_raw.ravel(), agg_raw.ravel()),
        "normalized": pearson(sums_norm.ravel(), agg_norm.ravel()),
        "individual": pearson(sums_individual.ravel(), agg_raw.ravel()),
    }
    own = c_agg.labels
    rows = np.arange(n_sets)
    minority_agg = agg_raw.sum(axis=1) - agg_raw[rows, own]
    minority_ind = sums_individual.sum(axis=1) - sums_individual[rows, own]
    bias = float(np.mean(minority_agg - minority_ind))

    set_labels = tuple(amap.set_name(x) for x in range(n_sets))
    return ConsistencyResult(
        set_labels=set_labels,
        community_count=r,
        sums_raw=sums_raw,
        agg_raw=agg_raw,
        sums_norm=sums_norm,
        agg_norm=agg_norm,
        sums_individual=sums_individual,
        correlations=correlations,
        minority_bias=bias,
    )


@dataclass(frozen=True)
class HeatmapResult:
    """Mean off-own-community unit share per (mu, mixing) cell.

    NaN marks cells whose configuration was infeasible.
    """

    mu_values: tuple[float, ...]
    m_values: tuple[float, ...]
    grid: np.ndarray


def _heatmap_cell(args) -> float:
    base, mu, m, seed, resolution = args
    try:
        cfg = replace(base, mu=mu, mixing=m, seed=seed)
    except ConfigError:
        return float("nan")
    g, _, amap = generate_sbm(cfg)
    g_agg = aggregate(g, amap)
    c_agg = leiden(g_agg, DetectConfig(resolution=resolution, seed=seed))
    shares = normalize_node(raw_membership(g_agg, c_agg)).values
    own = shares[np.arange(amap.set_count), c_agg.labels]
    mass = shares.sum(axis=1)
    minority = (mass - own)[mass > 0]
    return float(minority.mean()) if len(minority) else float("nan")


def run_heatmap_experiment(
    base: SbmConfig,
    mu_values,
    m_values,
    seeds_per_cell: int = 5,
    resolution: float = 1.0,
    jobs: int = 1,
) -> HeatmapResult:
    """Sweep the (mu, mixing) grid, averaging each cell over fresh seeds.

    Cell seeds derive from (base seed, cell position, repetition), so the
    grid is deterministic and independent of the job count.
    """
    if seeds_per_cell < 1:
        raise ConfigError("seeds_per_cell must be >= 1")
    mu_values = tuple(float(v) for v in mu_values)
    m_values = tuple(float(v) for v in m_values)
    tasks = []
    for i, mu in enumerate(mu_values):
        for j, m in enumerate(m_values):
            for rep in range(seeds_per_cell):
                seed = int(
                    np.random.SeedSequence([base.seed, i, j, rep]).generate_state(1)[0]
                )
                tasks.append((base, mu, m, seed, resolution))
    if jobs <= 1:
        values = [_heatmap_cell(task) for task in tasks]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(_heatmap_cell, tasks))
    grid = np.asarray(values, dtype=float).reshape(
        len(mu_values), len(m_values), seeds_per_cell
    )
    return HeatmapResult(mu_values, m_values, grid.mean(axis=2))
