import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from conftest import brute_force_assignment, chain_mesh, floyd_warshall_weighted
from semcorr import shapes
from semcorr.assignment import solve_assignment
from semcorr.errors import EmptyRegion, NonFiniteCost, UnknownRegionInPrior
from semcorr.geodesics import pairwise_subset
from semcorr.region_graph import (SemanticGraph, build_graph, edge_distance,
                                  farthest_point_sample, parse_priors, shortest_paths)
from semcorr.semantics import SemanticPartition


class TestAssignment:
    def test_two_by_two(self):
        a = solve_assignment([[1, 2], [2, 1]])
        assert a.rows.tolist() == [0, 1] and a.cols.tolist() == [0, 1] and a.cost == 2

    def test_single_row(self):
        a = solve_assignment([[5, 3, 9]])
        assert a.cols.tolist() == [1] and a.cost == 3

    def test_seven_by_seven_integer(self):
        rng = np.random.default_rng(11)
        for _ in range(3):
            c = rng.integers(0, 50, size=(7, 7))
            assert solve_assignment(c).cost == brute_force_assignment(c)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 9), st.integers(0, 100_000))
    def test_bruteforce_oracle(self, r, c, seed):
        cost = np.random.default_rng(seed).integers(-20, 20, size=(r, c)).astype(float)
        a = solve_assignment(cost)
        assert a.size == min(r, c)
        assert len(set(a.cols.tolist())) == a.size and len(set(a.rows.tolist())) == a.size
        assert a.cost == brute_force_assignment(cost)
        assert abs(a.cost - cost[a.rows, a.cols].sum()) < 1e-9

    def test_against_scipy_large(self):
        rng = np.random.default_rng(0)
        for shape in [(40, 60), (60, 40), (50, 50)]:
            c = rng.random(shape)
            r, k = linear_sum_assignment(c)
            assert abs(solve_assignment(c).cost - c[r, k].sum()) < 1e-9

    def test_non_finite(self):
        with pytest.raises(NonFiniteCost):
            solve_assignment([[1.0, np.nan]])
        with pytest.raises(NonFiniteCost):
            solve_assignment(np.zeros((0, 3)))

    def test_transpose_symmetry(self):
        c = np.random.default_rng(2).random((4, 7))
        assert np.isclose(solve_assignment(c).cost, solve_assignment(c.T).cost)


class TestEdgeDistance:
    def test_identical(self, sphere40):
        assert edge_distance(sphere40, [1, 2, 3], [3, 2, 1]) == 0.0

    def test_singletons(self, sphere40):
        d = pairwise_subset(sphere40, [4], [17])[0, 0]
        assert edge_distance(sphere40, [4], [17]) == d

    def test_chain(self):
        m = chain_mesh(4)
        assert edge_distance(m, [0, 1], [2, 3]) == 2.0

    def test_empty(self, sphere40):
        with pytest.raises(EmptyRegion):
            edge_distance(sphere40, [], [1])

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_bounds_and_symmetry(self, seed):
        m = shapes.random_sphere_mesh(40, seed=seed % 5)
        rng = np.random.default_rng(seed)
        a = rng.choice(40, rng.integers(1, 6), replace=False)
        b = rng.choice(40, rng.integers(1, 6), replace=False)
        C = pairwise_subset(m, a, b)
        d = edge_distance(m, a, b)
        assert C.min() - 1e-12 <= d <= C.max() + 1e-12
        assert abs(d - edge_distance(m, b, a)) < 1e-12
        assert abs(d - brute_force_assignment(C) / min(len(a), len(b))) < 1e-12

    def test_cap_subsamples(self, uv500):
        a = np.arange(0, 300)
        s = farthest_point_sample(uv500, a, 50, seed=1)
        assert len(s) == 50 and set(s) <= set(a)
        assert np.array_equal(s, farthest_point_sample(uv500, a, 50, seed=1))
        d_full = edge_distance(uv500, a, np.arange(300, 500), cap=None)
        d_cap = edge_distance(uv500, a, np.arange(300, 500), cap=64)
        assert abs(d_cap - d_full) / d_full < 0.25


class TestGraph:
    def test_chain_priors(self):
        D = shortest_paths(3, [(0, 1), (1, 2)], [1.0, 2.0])
        assert D[0, 2] == 3.0 and np.all(np.diag(D) == 0)

    def test_triangle_heavy_edge(self):
        D = shortest_paths(3, [(0, 1), (1, 2), (0, 2)], [1.0, 1.0, 5.0])
        assert D[0, 2] == 2.0

    def test_single_region(self, sphere40):
        part = SemanticPartition(np.zeros(40, dtype=int), ("body",))
        g = build_graph(part, [], sphere40)
        assert g.distances.shape == (1, 1) and g.distances[0, 0] == 0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 100_000))
    def test_floyd_warshall_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(0, n * (n - 1) // 2 + 2))
        edges = [tuple(rng.integers(0, n, 2)) for _ in range(m)]
        # dyadic weights keep every path sum exact in floating point
        weights = rng.integers(1, 64, size=m) / 8.0
        D = shortest_paths(n, edges, weights)
        assert np.array_equal(D, floyd_warshall_weighted(n, edges, weights))
        assert np.all(np.diag(D) == 0) and np.array_equal(D, D.T)

    def test_build_graph_weights(self):
        m = chain_mesh(6)
        labels = np.array([0, 0, 1, 1, 2, 2] + [2] * 5)
        part = SemanticPartition(labels, ("a", "b", "c"))
        g = build_graph(part, [("a", "b"), ("b", "c")], m, cap=None)
        for (i, j), w in zip(g.edges, g.weights):
            assert w == edge_distance(m, part.region(i), part.region(j), cap=None)
        assert np.isclose(g.distances[0, 2], g.weights.sum())
        fw = floyd_warshall_weighted(3, g.edges, g.weights)
        assert np.allclose(g.distances, fw)

    def test_disconnected_priors_margin(self):
        m = chain_mesh(6)
        part = SemanticPartition(np.array([0, 0, 1, 1, 2, 2] + [2] * 5), ("a", "b", "c"))
        g = build_graph(part, [("a", "b")], m)
        assert np.isinf(g.distances[0, 2])
        M = g.margin_distances()
        assert M[0, 2] == g.finite_diameter() == g.distances[0, 1]

    def test_unknown_region(self, sphere40):
        part = SemanticPartition(np.zeros(40, dtype=int), ("body",))
        with pytest.raises(UnknownRegionInPrior):
            build_graph(part, [("body", "tail")], sphere40)
        with pytest.raises(UnknownRegionInPrior):
            parse_priors({"edges": [["body", 3]]}, ("body",))

    def test_empty_region_skipped(self, sphere40):
        part = SemanticPartition(np.zeros(40, dtype=int), ("body", "tail"))
        with pytest.warns(UserWarning):
            g = build_graph(part, [("body", "tail")], sphere40)
        assert g.edges == () and g.active == (0,)

    def test_json_round_trip(self):
        m = chain_mesh(6)
        part = SemanticPartition(np.array([0, 0, 1, 1, 2, 2] + [2] * 5), ("a", "b", "c"))
        g = build_graph(part, parse_priors('{"edges": [["a", "b"]]}', part.names), m)
        text = g.to_json()
        assert json.loads(text)["distances"][0][2] is None
        h = SemanticGraph.from_json(text)
        assert h.names == g.names and h.edges == g.edges
        assert np.array_equal(h.distances, g.distances)
