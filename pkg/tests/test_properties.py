from collections import deque
from itertools import combinations

import numpy as np
import pytest
from scipy import special

from gcflsim.errors import UndefinedStatisticError
from gcflsim.graphs import Dataset, complete_graph
from gcflsim.properties import (
    avg_clustering_coefficient,
    avg_shortest_path,
    degree_kurtosis,
    largest_component_fraction,
    property_significance,
    welch_p_value,
)

from conftest import make_graph, random_graph


# --- independent brute-force references -----------------------------------


def brute_shortest_path(graph):
    n = graph.num_nodes
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v in graph.edges:
        dist[u, v] = dist[v, u] = 1.0
    for k in range(n):  # Floyd-Warshall
        for i in range(n):
            for j in range(n):
                if dist[i, k] + dist[k, j] < dist[i, j]:
                    dist[i, j] = dist[i, k] + dist[k, j]
    vals = [dist[i, j] for i, j in combinations(range(n), 2) if np.isfinite(dist[i, j])]
    return float(np.mean(vals)) if vals else None


def brute_clustering(graph):
    es = graph.edge_set()
    total = 0.0
    for v in range(graph.num_nodes):
        nbrs = [u for u in range(graph.num_nodes)
                if (min(u, v), max(u, v)) in es and u != v]
        if len(nbrs) < 2:
            continue
        tri = sum(1 for a, b in combinations(nbrs, 2) if (min(a, b), max(a, b)) in es)
        total += tri / (len(nbrs) * (len(nbrs) - 1) / 2)
    return total / graph.num_nodes


def brute_largest_component(graph):
    es = graph.edge_set()
    seen, best = set(), 0
    for s in range(graph.num_nodes):
        if s in seen:
            continue
        comp, queue = {s}, deque([s])
        while queue:
            u = queue.popleft()
            for v in range(graph.num_nodes):
                if v not in comp and (min(u, v), max(u, v)) in es:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        best = max(best, len(comp))
    return 100.0 * best / graph.num_nodes


def brute_kurtosis(values):
    values = np.asarray(values, dtype=float)
    mu = values.mean()
    m2 = np.mean((values - mu) ** 2)
    m4 = np.mean((values - mu) ** 4)
    return m4 / m2**2


def welch_oracle(a, b):
    """Welch statistic plus t CDF via the regularized incomplete beta."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    t = (a.mean() - b.mean()) / np.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    x = df / (df + t**2)
    return float(special.betainc(df / 2, 0.5, x))  # two-sided


# --- unit behavior ----------------------------------------------------------


class TestDegreeKurtosis:
    def test_star_matches_moment_formula(self):
        star = make_graph(10, [(0, i) for i in range(1, 10)])
        ds = Dataset("star", [star])
        degrees = [9] + [1] * 9
        assert degree_kurtosis(ds) == pytest.approx(brute_kurtosis(degrees), abs=1e-12)

    def test_cycle_zero_variance_raises(self):
        cycle = make_graph(5, [(i, (i + 1) % 5) for i in range(5)])
        with pytest.raises(UndefinedStatisticError):
            degree_kurtosis(Dataset("cycle", [cycle]))

    def test_pooled_over_graphs(self):
        g1 = make_graph(3, [(0, 1)])
        g2 = make_graph(3, [(0, 1), (1, 2), (0, 2)])
        pooled = [1, 1, 0, 2, 2, 2]
        assert degree_kurtosis(Dataset("two", [g1, g2])) == pytest.approx(
            brute_kurtosis(pooled), abs=1e-12)


class TestAvgShortestPath:
    def test_path3(self, path3):
        assert avg_shortest_path(path3) == pytest.approx(4.0 / 3.0)

    def test_complete_graphs_are_one(self):
        for n in range(2, 9):
            assert avg_shortest_path(complete_graph(n)) == 1.0

    def test_disconnected_pairs_excluded(self):
        g = make_graph(4, [(0, 1), (2, 3)])
        assert avg_shortest_path(g) == 1.0

    def test_edgeless_raises(self):
        with pytest.raises(UndefinedStatisticError):
            avg_shortest_path(make_graph(3, []))


class TestClusteringAndComponents:
    def test_triangle_is_one(self, triangle):
        assert avg_clustering_coefficient(triangle) == 1.0

    def test_star_is_zero(self, star5):
        assert avg_clustering_coefficient(star5) == 0.0

    def test_complete_graphs(self):
        for n in range(3, 8):
            assert avg_clustering_coefficient(complete_graph(n)) == 1.0

    def test_connected_fraction(self, triangle):
        assert largest_component_fraction(triangle) == 100.0

    def test_two_components(self):
        g = make_graph(4, [(0, 1), (1, 2)])
        assert largest_component_fraction(g) == 75.0


def test_properties_match_brute_force_on_random_graphs():
    rng = np.random.default_rng(11)
    for _ in range(50):
        g = random_graph(rng, n=int(rng.integers(3, 13)))
        assert avg_clustering_coefficient(g) == pytest.approx(brute_clustering(g), abs=1e-12)
        assert largest_component_fraction(g) == pytest.approx(
            brute_largest_component(g), abs=1e-12)
        ref = brute_shortest_path(g)
        if ref is not None:
            assert avg_shortest_path(g) == pytest.approx(ref, abs=1e-12)
        degrees = g.degrees
        if np.var(degrees) > 0:
            assert degree_kurtosis(Dataset("d", [g])) == pytest.approx(
                brute_kurtosis(degrees), abs=1e-12)


class TestWelch:
    def test_clearly_separated_samples(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0.0, 1.0, 100)
        b = rng.normal(5.0, 1.0, 100)
        assert welch_p_value(a, b) < 1e-6

    def test_matches_incomplete_beta_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rng.normal(0, 1, int(rng.integers(5, 40)))
            b = rng.normal(rng.uniform(-1, 1), 1.3, int(rng.integers(5, 40)))
            assert welch_p_value(a, b) == pytest.approx(welch_oracle(a, b), rel=1e-10)

    def test_identical_constant_samples(self):
        assert welch_p_value([2.0, 2.0, 2.0], [2.0, 2.0, 2.0]) == 1.0


class TestPropertySignificance:
    @staticmethod
    def _dataset(rng, count=12):
        return Dataset("rand", [random_graph(rng, n=8) for _ in range(count)])

    def test_identity_null_gives_p_one(self):
        ds = self._dataset(np.random.default_rng(3))
        report = property_significance(ds, seed=0, null_factory=lambda g, k: g)
        for prop, stat in report.rows.items():
            if stat.computed:
                assert stat.p_value == pytest.approx(1.0)
                assert stat.real == pytest.approx(stat.random)

    def test_invariant_to_graph_order(self):
        rng = np.random.default_rng(9)
        graphs = [random_graph(rng, n=7) for _ in range(10)]
        fwd = property_significance(Dataset("a", graphs), seed=4)
        rev = property_significance(Dataset("a", graphs[::-1]), seed=4)
        for prop in fwd.rows:
            assert fwd.rows[prop].real == pytest.approx(rev.rows[prop].real, abs=1e-12)
            assert fwd.rows[prop].random == pytest.approx(rev.rows[prop].random, abs=1e-12)
            if fwd.rows[prop].computed:
                assert fwd.rows[prop].p_value == pytest.approx(rev.rows[prop].p_value, abs=1e-12)

    def test_csv_rows(self, tmp_path):
        ds = self._dataset(np.random.default_rng(2))
        report = property_significance(ds, seed=1)
        out = tmp_path / "props.csv"
        report.write_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "property,real,random,p_value"
        assert len(lines) == 5

    def test_mostly_undefined_property_flagged_not_computed(self, tmp_path):
        # cycles have constant degree, so kurtosis is undefined per graph
        # and for the pooled sequence
        cycles = [make_graph(n, [(i, (i + 1) % n) for i in range(n)])
                  for n in (4, 5, 6, 7)]
        report = property_significance(Dataset("cycles", cycles), seed=0)
        stat = report.rows["degree_kurtosis"]
        assert not stat.computed and stat.p_value is None
        out = tmp_path / "props.csv"
        report.write_csv(out)
        assert "not_computed" in out.read_text()


class TestPaperValues:
    """Published reference statistics; these need the real TU files on disk."""

    def test_enzymes_clustering_coefficient(self):
        from conftest import require_dataset
        ds = require_dataset("ENZYMES")
        mean_cc = np.mean([avg_clustering_coefficient(g) for g in ds.graphs])
        assert abs(mean_cc - 0.4516) <= 0.01

    def test_ptc_mr_average_shortest_path(self):
        from conftest import require_dataset
        ds = require_dataset("PTC_MR")
        vals = []
        for g in ds.graphs:
            try:
                vals.append(avg_shortest_path(g))
            except UndefinedStatisticError:
                pass
        assert abs(np.mean(vals) - 3.36) <= 0.05
