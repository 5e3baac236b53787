"""Membership diversity and its gravity-model null distribution.

The Gini-Simpson index of a membership row is 1 minus the sum of squared
unit shares, ranging from 0 (all mass in one community) to 1 - 1/r.

The null model for an aggregated spatial network is a gravity form

    T_xy = kappa * p_x * p_y / d_xy ** beta

fitted by ordinary least squares on log w_xy - log(p_x * p_y) against
log d_xy over positive off-diagonal pairs (slope -beta), with kappa scaled
so the expected total pair mass, self pairs included, matches the observed
total exactly. Self-pair distance defaults to a fixed fraction of the
nearest neighbour distance. Monte Carlo samples draw independent Poisson
pair weights from T; per-set means and standard deviations of the sampled
diversity give the z score of the observed value.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detect import DetectConfig, leiden
from .errors import ConfigError, FormatError, ValidationError
from .fileio import parse_float, read_table
from .graph import CommunityAssignment, WeightedGraph
from .membership import normalize_node, raw_membership

__all__ = [
    "SpatialAttributes",
    "GravityConfig",
    "GravityFit",
    "DiversityReport",
    "gsi",
    "fit_gravity",
    "null_diversity",
    "load_spatial",
]


@dataclass(frozen=True, eq=False)
class SpatialAttributes:
    """Coordinates and population per set, aligned by set identifier.

    self_distance optionally overrides the derived self-pair distance for
    individual sets; NaN entries fall back to the default rule.
    """

    labels: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray
    population: np.ndarray
    self_distance: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.labels)
        if len(set(self.labels)) != n:
            raise ValidationError("set identifiers must be unique")
        for name in ("x", "y", "population"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
            if arr.shape != (n,):
                raise ValidationError(f"{name} must have one value per set")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} values must be finite")
        if np.any(self.population <= 0):
            raise ValidationError("populations must be > 0")
        if self.self_distance is not None:
            arr = np.asarray(self.self_distance, dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, "self_distance", arr)
            if arr.shape != (n,):
                raise ValidationError("self_distance must have one value per set")
            given = ~np.isnan(arr)
            if np.any(arr[given] <= 0):
                raise ValidationError("self-distance overrides must be > 0")

    def aligned_to(self, g: WeightedGraph) -> "SpatialAttributes":
        """Reorder to a graph's node labels. Extra rows are dropped; a graph
        node without spatial data is an error."""
        index = {label: i for i, label in enumerate(self.labels)}
        rows = []
        for label in g.node_labels:
            if label not in index:
                raise ValidationError(f"no spatial attributes for set {label!r}")
            rows.append(index[label])
        order = np.array(rows, dtype=np.int64)
        return SpatialAttributes(
            labels=g.node_labels,
            x=self.x[order],
            y=self.y[order],
            population=self.population[order],
            self_distance=None if self.self_distance is None else self.self_distance[order],
        )


@dataclass(frozen=True)
class GravityConfig:
    """Null-model settings. beta None means fit the exponent from the data."""

    beta: float | None = None
    samples: int = 100
    seed: int = 0
    self_distance_factor: float = 0.5
    sigma_floor: float = 1e-12

    def __post_init__(self):
        if self.beta is not None and (not np.isfinite(self.beta) or self.beta < 0):
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")
        if self.samples < 2:
            raise ConfigError("need at least 2 null samples")
        if not 0 < self.self_distance_factor <= 1:
            raise ConfigError("self_distance_factor must be in (0, 1]")
        if not self.sigma_floor > 0:
            raise ConfigError("sigma_floor must be > 0")


@dataclass(frozen=True)
class GravityFit:
    kappa: float
    beta: float


@dataclass(frozen=True)
class DiversityReport:
    """Observed diversity per set with null mean, spread and z score.

    NaN marks missing values: sets whose observed membership row is zero, or
    whose null distribution never produced two valid samples.
    """

    set_labels: tuple[str, ...]
    gsi_observed: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    z: np.ndarray
    fit: GravityFit


def gsi(shares) -> float | None:
    """Gini-Simpson index of a nonnegative membership row.

    The row is rescaled to unit sum first, so any membership kind can be
    passed. A zero row has no diversity and returns None.
    """
    arr = np.asarray(shares, dtype=float)
    if arr.ndim != 1:
        raise ValidationError("gsi expects a 1-d membership row")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError("membership shares must be finite and >= 0")
    total = arr.sum()
    if total == 0:
        return None
    p = arr / total
    return float(1.0 - p @ p)


def _pair_distances(s: SpatialAttributes, theta: float) -> np.ndarray:
    """Full distance matrix with the self-pair rule on the diagonal."""
    dx = s.x[:, None] - s.x[None, :]
    dy = s.y[:, None] - s.y[None, :]
    dist = np.hypot(dx, dy)
    n = len(s.labels)
    if n >= 2:
        off = dist + np.diag(np.full(n, np.inf))
        zero = np.argwhere(off == 0)
        if len(zero):
            a, b = zero[0]
            raise ValidationError(
                f"sets {s.labels[a]!r} and {s.labels[b]!r} share coordinates; "
                "distances must be positive"
            )
        nearest = off.min(axis=1)
        np.fill_diagonal(dist, theta * nearest)
    else:
        np.fill_diagonal(dist, np.nan)
    if s.self_distance is not None:
        given = np.flatnonzero(~np.isnan(s.self_distance))
        dist[given, given] = s.self_distance[given]
    if np.any(np.isnan(np.diag(dist))) or np.any(np.diag(dist) <= 0):
        raise ValidationError(
            "self-pair distance undefined; provide self_distance overrides"
        )
    return dist


def _expected_pair_mass(s: SpatialAttributes, beta: float, theta: float) -> np.ndarray:
    """Unscaled T matrix p_x p_y / d^beta, symmetric, diagonal included."""
    dist = _pair_distances(s, theta)
    pp = s.population[:, None] * s.population[None, :]
    return pp / dist**beta


def _observed_pair_mass(g: WeightedGraph) -> float:
    # One unit per unordered pair; diagonal mass enters at half value, the
    # same convention the sampler uses when storing d = 2 * self mass.
    return float(g.edge_w.sum() + g.diagonal_mass.sum() / 2.0)


def _rescale_kappa(g: WeightedGraph, s: SpatialAttributes, beta: float, theta: float) -> float:
    unscaled = _expected_pair_mass(s, beta, theta)
    n = len(s.labels)
    upper = np.triu_indices(n, k=0)
    denom = float(unscaled[upper].sum())
    if denom <= 0:
        raise ValidationError("expected gravity mass is zero; cannot calibrate")
    return _observed_pair_mass(g) / denom


def fit_gravity(g: WeightedGraph, s: SpatialAttributes,
                self_distance_factor: float = 0.5) -> GravityFit:
    """Fit the distance exponent and scale of the gravity null model.

    beta is the negated OLS slope of log w_xy - log(p_x p_y) on log d_xy over
    off-diagonal pairs with positive weight; kappa is then scaled so the
    expected total pair mass matches the observed total exactly.
    """
    s = s.aligned_to(g)
    n = g.node_count
    if n < 3:
        raise ConfigError(
            "gravity fit needs at least 3 sets; supply beta explicitly instead"
        )
    if g.edge_count < 2:
        raise ValidationError("gravity fit needs at least 2 positive pairs")
    dist = _pair_distances(s, self_distance_factor)
    d_pairs = dist[g.edge_u, g.edge_v]
    log_d = np.log(d_pairs)
    if np.ptp(log_d) == 0:
        raise ValidationError(
            "all positive pairs sit at one distance; exponent is unidentifiable"
        )
    response = np.log(g.edge_w) - np.log(
        s.population[g.edge_u] * s.population[g.edge_v]
    )
    design = np.column_stack([log_d, np.ones_like(log_d)])
    (slope, _intercept), *_ = np.linalg.lstsq(design, response, rcond=None)
    beta = float(-slope)
    kappa = _rescale_kappa(g, s, beta, self_distance_factor)
    return GravityFit(kappa=kappa, beta=beta)


def _membership_gsi(g: WeightedGraph, c: CommunityAssignment) -> np.ndarray:
    shares = normalize_node(raw_membership(g, c))
    out = np.empty(g.node_count, dtype=float)
    for i in range(g.node_count):
        value = gsi(shares.values[i])
        out[i] = np.nan if value is None else value
    return out


def _sample_gsi(args) -> np.ndarray:
    (t_matrix, labels, c_labels, r, seed, index, redetect, resolution, max_passes) = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    n = t_matrix.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    weights = rng.poisson(t_matrix[iu, ju]).astype(float)
    self_mass = rng.poisson(np.diag(t_matrix)).astype(float)
    keep = weights > 0
    edges = zip(iu[keep].tolist(), ju[keep].tolist(), weights[keep].tolist())
    sample = WeightedGraph(n, edges, diagonal_mass=2.0 * self_mass, node_labels=labels)
    if redetect:
        detect_seed = int(
            np.random.SeedSequence([seed, index, 1]).generate_state(1)[0]
        )
        try:
            c = leiden(sample, DetectConfig(resolution=resolution, seed=detect_seed,
                                            max_passes=max_passes))
        except ValidationError:
            return np.full(n, np.nan)
    else:
        c = CommunityAssignment(np.asarray(c_labels), r)
    return _membership_gsi(sample, c)


def null_diversity(
    g: WeightedGraph,
    c: CommunityAssignment,
    s: SpatialAttributes,
    cfg: GravityConfig | None = None,
    jobs: int = 1,
    redetect: bool = False,
    detect_cfg: DetectConfig | None = None,
) -> DiversityReport:
    """Observed per-set diversity with gravity-null mean, sigma and z.

    Each Monte Carlo sample draws Poisson pair weights (self pairs included,
    stored as diagonal mass at twice the sampled value) from the fitted or
    supplied gravity model, then scores diversity under the observed
    partition; with redetect=True each sample is re-partitioned by seeded
    detection instead. Sample k uses an RNG stream derived from (seed, k),
    so results are identical for any job count.
    """
    if cfg is None:
        cfg = GravityConfig()
    if c.node_count != g.node_count:
        raise ValidationError(
            f"partition labels {c.node_count} sets, graph has {g.node_count}"
        )
    s = s.aligned_to(g)
    theta = cfg.self_distance_factor
    if cfg.beta is None:
        fit = fit_gravity(g, s, self_distance_factor=theta)
    else:
        fit = GravityFit(
            kappa=_rescale_kappa(g, s, cfg.beta, theta), beta=cfg.beta
        )
    t_matrix = fit.kappa * _expected_pair_mass(s, fit.beta, theta)

    observed = _membership_gsi(g, c)

    if detect_cfg is None:
        detect_cfg = DetectConfig()
    tasks = [
        (
            t_matrix,
            g.node_labels,
            c.labels,
            c.community_count,
            cfg.seed,
            k,
            redetect,
            detect_cfg.resolution,
            detect_cfg.max_passes,
        )
        for k in range(cfg.samples)
    ]
    if jobs <= 1:
        sampled = [_sample_gsi(task) for task in tasks]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            sampled = list(pool.map(_sample_gsi, tasks))
    table = np.vstack(sampled)

    n = g.node_count
    mu = np.full(n, np.nan)
    sigma = np.full(n, np.nan)
    z = np.full(n, np.nan)
    for i in range(n):
        column = table[:, i]
        valid = column[~np.isnan(column)]
        if len(valid) < 2:
            continue
        mu[i] = valid.mean()
        sigma[i] = valid.std(ddof=1)
        if not np.isnan(observed[i]):
            z[i] = (observed[i] - mu[i]) / max(sigma[i], cfg.sigma_floor)
    return DiversityReport(
        set_labels=g.node_labels,
        gsi_observed=observed,
        mu=mu,
        sigma=sigma,
        z=z,
        fit=fit,
    )


SPATIAL_HEADER = ("set_id", "x", "y", "population")


def load_spatial(path: str | Path) -> SpatialAttributes:
    """Load per-set coordinates and populations from a tab-separated file."""
    labels: list[str] = []
    xs: list[float] = []
    ys: list[float] = []
    pops: list[float] = []
    seen: set[str] = set()
    for lineno, fields in read_table(path, SPATIAL_HEADER):
        set_id, xf, yf, pf = fields
        if not set_id:
            raise FormatError(f"{path}:{lineno}: empty set identifier")
        if set_id in seen:
            raise FormatError(f"{path}:{lineno}: duplicate row for set {set_id!r}")
        seen.add(set_id)
        labels.append(set_id)
        xs.append(parse_float(path, lineno, xf, "x coordinate"))
        ys.append(parse_float(path, lineno, yf, "y coordinate"))
        population = parse_float(path, lineno, pf, "population")
        if population <= 0:
            raise FormatError(f"{path}:{lineno}: population must be > 0, got {pf}")
        pops.append(population)
    if not labels:
        raise FormatError(f"{path}: no spatial rows")
    return SpatialAttributes(
        labels=tuple(labels),
        x=np.array(xs),
        y=np.array(ys),
        population=np.array(pops),
    )
