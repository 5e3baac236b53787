import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfmm import (
    CommunityAssignment,
    ConfigError,
    FormatError,
    GravityConfig,
    SpatialAttributes,
    ValidationError,
    WeightedGraph,
    fit_gravity,
    gsi,
    load_spatial,
    null_diversity,
)


def test_gsi_hand_values():
    assert gsi(np.array([1.0, 0.0])) == 0.0
    assert gsi(np.array([0.5, 0.5])) == pytest.approx(0.5)
    assert gsi(np.array([2 / 3, 1 / 3])) == pytest.approx(4 / 9)
    assert gsi(np.array([2.0, 1.0])) == pytest.approx(4 / 9)  # rescaling
    assert gsi(np.array([1.0])) == 0.0
    assert gsi(np.array([0.0, 0.0])) is None


def test_gsi_uniform_hits_theoretical_maximum():
    assert gsi(np.full(4, 0.25)) == pytest.approx(0.75, abs=1e-15)
    for r in range(2, 9):
        assert gsi(np.full(r, 1.0 / r)) == pytest.approx(1 - 1 / r, abs=1e-12)


def test_gsi_input_validation():
    with pytest.raises(ValidationError):
        gsi(np.array([[0.5, 0.5]]))
    with pytest.raises(ValidationError):
        gsi(np.array([0.5, -0.1]))
    with pytest.raises(ValidationError):
        gsi(np.array([0.5, float("nan")]))


@settings(max_examples=300, deadline=None)
@given(
    shares=st.lists(
        st.floats(min_value=0, max_value=1000, allow_nan=False),
        min_size=1,
        max_size=8,
    )
)
def test_gsi_bounds_property(shares):
    arr = np.asarray(shares)
    value = gsi(arr)
    if value is None:
        assert arr.sum() == 0
        return
    r = len(arr)
    assert -1e-12 <= value <= 1 - 1 / r + 1e-12


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_gsi_rises_when_two_shares_average(data):
    r = data.draw(st.integers(min_value=2, max_value=6))
    shares = np.asarray(
        data.draw(
            st.lists(
                st.floats(min_value=0.001, max_value=10, allow_nan=False),
                min_size=r,
                max_size=r,
            )
        )
    )
    i, j = data.draw(st.tuples(st.integers(0, r - 1), st.integers(0, r - 1)))
    if i == j:
        return
    mixed = shares.copy()
    mixed[i] = mixed[j] = (shares[i] + shares[j]) / 2
    assert gsi(mixed) >= gsi(shares) - 1e-12


def _grid_spatial(n_side, spacing=1.0, population=None):
    xs, ys, labels = [], [], []
    for i in range(n_side):
        for j in range(n_side):
            xs.append(i * spacing)
            ys.append(j * spacing)
            labels.append(f"s{i}_{j}")
    count = n_side * n_side
    pop = np.full(count, 100.0) if population is None else np.asarray(population, float)
    return SpatialAttributes(tuple(labels), np.array(xs), np.array(ys), pop)


def _gravity_exact_graph(spatial, beta, kappa=1.0, theta=0.5):
    """Deterministic graph whose weights sit exactly on the gravity curve."""
    n = len(spatial.labels)
    edges = []
    diag = np.zeros(n)
    for i in range(n):
        for j in range(i, n):
            dx = spatial.x[i] - spatial.x[j]
            dy = spatial.y[i] - spatial.y[j]
            if i == j:
                nn = np.inf
                for k in range(n):
                    if k != i:
                        nn = min(nn, float(np.hypot(spatial.x[i] - spatial.x[k],
                                                    spatial.y[i] - spatial.y[k])))
                d = theta * nn
                diag[i] = 2 * kappa * spatial.population[i] ** 2 / d**beta
            else:
                d = float(np.hypot(dx, dy))
                w = kappa * spatial.population[i] * spatial.population[j] / d**beta
                edges.append((i, j, w))
    return WeightedGraph(n, edges=edges, diagonal_mass=diag, node_labels=spatial.labels)


def test_fit_recovers_exponent_on_noiseless_data():
    rng = np.random.default_rng(5)
    spatial = _grid_spatial(4, population=rng.uniform(50, 500, 16))
    g = _gravity_exact_graph(spatial, beta=2.0)
    fit = fit_gravity(g, spatial)
    assert fit.beta == pytest.approx(2.0, abs=1e-9)
    assert fit.kappa == pytest.approx(1.0, rel=1e-9)


def test_fit_recovers_other_exponents():
    spatial = _grid_spatial(3, population=np.linspace(10, 90, 9))
    for beta in (0.5, 1.0, 3.0):
        g = _gravity_exact_graph(spatial, beta=beta, kappa=2.5)
        fit = fit_gravity(g, spatial)
        assert fit.beta == pytest.approx(beta, abs=1e-9)
        assert fit.kappa == pytest.approx(2.5, rel=1e-9)


def test_fit_beta_invariant_under_population_scaling():
    spatial = _grid_spatial(3, population=np.linspace(20, 100, 9))
    g = _gravity_exact_graph(spatial, beta=2.0)
    fit = fit_gravity(g, spatial)
    scaled = SpatialAttributes(spatial.labels, spatial.x, spatial.y,
                               spatial.population * 10.0)
    fit_scaled = fit_gravity(g, scaled)
    assert fit_scaled.beta == pytest.approx(fit.beta, abs=1e-9)
    assert fit_scaled.kappa == pytest.approx(fit.kappa / 100.0, rel=1e-9)


def test_fit_needs_three_sets():
    spatial = SpatialAttributes(("a", "b"), np.array([0.0, 1.0]),
                                np.array([0.0, 0.0]), np.array([10.0, 10.0]))
    g = WeightedGraph(2, edges=[(0, 1, 5.0)], node_labels=("a", "b"))
    with pytest.raises(ConfigError, match="beta"):
        fit_gravity(g, spatial)


def test_fit_rejects_degenerate_geometry():
    # equilateral triangle: every pair distance identical
    spatial = SpatialAttributes(
        ("a", "b", "c"),
        np.array([0.0, 1.0, 0.5]),
        np.array([0.0, 0.0, np.sqrt(3) / 2]),
        np.array([10.0, 10.0, 10.0]),
    )
    g = WeightedGraph(3, edges=[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)],
                      node_labels=("a", "b", "c"))
    with pytest.raises(ValidationError, match="distance"):
        fit_gravity(g, spatial)


def test_coincident_sets_are_rejected():
    spatial = SpatialAttributes(
        ("a", "b", "c"),
        np.array([0.0, 0.0, 1.0]),
        np.array([0.0, 0.0, 0.0]),
        np.array([10.0, 10.0, 10.0]),
    )
    g = WeightedGraph(3, edges=[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
                      node_labels=("a", "b", "c"))
    with pytest.raises(ValidationError, match="a.*b|coincide"):
        fit_gravity(g, spatial)


def test_spatial_attribute_validation():
    with pytest.raises(ValidationError, match="unique"):
        SpatialAttributes(("a", "a"), np.zeros(2), np.zeros(2), np.ones(2))
    with pytest.raises(ValidationError, match="> 0"):
        SpatialAttributes(("a", "b"), np.zeros(2), np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ValidationError):
        SpatialAttributes(("a", "b"), np.zeros(3), np.zeros(2), np.ones(2))


def test_spatial_alignment_reorders_and_drops_extras(g4):
    spatial = SpatialAttributes(
        ("4", "3", "2", "1", "extra"),
        np.arange(5.0),
        np.zeros(5),
        np.arange(1.0, 6.0),
    )
    aligned = spatial.aligned_to(g4)
    assert aligned.labels == ("1", "2", "3", "4")
    assert np.array_equal(aligned.x, [3.0, 2.0, 1.0, 0.0])
    missing = SpatialAttributes(("1", "2"), np.zeros(2), np.zeros(2), np.ones(2))
    with pytest.raises(ValidationError, match="'3'"):
        missing.aligned_to(g4)


def _small_case(seed=0):
    rng = np.random.default_rng(seed)
    spatial = _grid_spatial(3, population=rng.uniform(50, 200, 9))
    g = _gravity_exact_graph(spatial, beta=2.0, kappa=0.02)
    labels = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
    c = CommunityAssignment(labels, 3)
    return g, c, spatial


def test_null_diversity_deterministic_and_jobs_invariant():
    g, c, spatial = _small_case()
    cfg = GravityConfig(samples=25, seed=4)
    one = null_diversity(g, c, spatial, cfg)
    again = null_diversity(g, c, spatial, cfg)
    parallel = null_diversity(g, c, spatial, cfg, jobs=3)
    for a, b in ((one, again), (one, parallel)):
        assert np.array_equal(a.z, b.z, equal_nan=True)
        assert np.array_equal(a.mu, b.mu, equal_nan=True)
        assert np.array_equal(a.sigma, b.sigma, equal_nan=True)
    different = null_diversity(g, c, spatial, GravityConfig(samples=25, seed=5))
    assert not np.array_equal(one.mu, different.mu, equal_nan=True)


def test_null_diversity_report_shape_and_fit():
    g, c, spatial = _small_case()
    report = null_diversity(g, c, spatial, GravityConfig(samples=30, seed=1))
    n = g.node_count
    for field in (report.gsi_observed, report.mu, report.sigma, report.z):
        assert field.shape == (n,)
    assert report.fit.beta == pytest.approx(2.0, abs=1e-9)
    assert np.all(np.isfinite(report.z))
    assert report.set_labels == g.node_labels


def test_null_diversity_supplied_beta_skips_fit():
    g, c, spatial = _small_case()
    report = null_diversity(g, c, spatial, GravityConfig(beta=1.5, samples=20, seed=2))
    assert report.fit.beta == 1.5
    assert report.fit.kappa > 0


def test_null_diversity_redetect_smoke():
    g, c, spatial = _small_case()
    cfg = GravityConfig(samples=12, seed=3)
    base = null_diversity(g, c, spatial, cfg, redetect=True)
    again = null_diversity(g, c, spatial, cfg, redetect=True)
    assert np.array_equal(base.z, again.z, equal_nan=True)


def test_null_diversity_zero_membership_row_is_missing():
    spatial = SpatialAttributes(
        ("a", "b", "c", "d"),
        np.array([0.0, 1.0, 2.0, 4.0]),
        np.zeros(4),
        np.array([10.0, 10.0, 10.0, 10.0]),
    )
    g = WeightedGraph(4, edges=[(0, 1, 2.0), (1, 2, 1.0), (0, 2, 1.0)],
                      node_labels=("a", "b", "c", "d"))
    c = CommunityAssignment(np.array([0, 0, 1, 1]), 2)
    report = null_diversity(g, c, spatial, GravityConfig(beta=2.0, samples=10, seed=0))
    assert np.isnan(report.gsi_observed[3])
    assert np.isnan(report.z[3])


def test_gravity_config_validation():
    with pytest.raises(ConfigError):
        GravityConfig(beta=-1.0)
    with pytest.raises(ConfigError):
        GravityConfig(samples=1)
    with pytest.raises(ConfigError):
        GravityConfig(self_distance_factor=0.0)
    with pytest.raises(ConfigError):
        GravityConfig(self_distance_factor=1.5)
    with pytest.raises(ConfigError):
        GravityConfig(sigma_floor=0.0)


def test_load_spatial(tmp_path):
    p = tmp_path / "spatial.tsv"
    p.write_text("set_id\tx\ty\tpopulation\nA\t0\t0\t100\nB\t1\t0\t50\n")
    s = load_spatial(p)
    assert s.labels == ("A", "B")
    assert np.array_equal(s.population, [100.0, 50.0])
    p.write_text("set_id\tx\ty\tpopulation\nA\t0\t0\t100\nA\t1\t0\t50\n")
    with pytest.raises(FormatError, match="duplicate"):
        load_spatial(p)
    p.write_text("set_id\tx\ty\tpopulation\nA\t0\t0\t0\n")
    with pytest.raises(FormatError, match="population"):
        load_spatial(p)
    p.write_text("set_id\tx\ty\tpopulation\n")
    with pytest.raises(FormatError, match="no .*rows|empty"):
        load_spatial(p)
