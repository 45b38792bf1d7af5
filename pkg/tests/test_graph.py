import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from conftest import random_graph
from hardygraph.generators import lattice_box, path_graph, single_vertex, two_vertex
from hardygraph.graph import (GraphError, WeightedGraph, apply_laplacian, boundary_distance, build_graph,
                              dirichlet_restriction, metric_annotation, quadratic_form)


def path_abc():
    return build_graph([("a", 1, 0), ("b", 1, 0), ("c", 1, 0)], [("a", "b", 1), ("b", "c", 1)])


class TestBuildGraph:
    def test_single_vertex(self):
        G = build_graph([("o", 1, 4)], [])
        assert G.n == 1 and G.n_edges == 0 and G.c[0] == 4

    def test_two_vertex(self):
        G = build_graph([("o", 1, 1), ("x", 1, 1)], [("o", "x", 1)])
        assert G.n_edges == 1
        np.testing.assert_array_equal(G.deg, [1, 1])

    def test_disconnected(self):
        with pytest.raises(GraphError, match="disconnected"):
            build_graph([("a", 1, 0), ("b", 1, 0)], [])

    def test_duplicate_vertex(self):
        with pytest.raises(GraphError, match="duplicate"):
            build_graph([("a", 1, 0), ("a", 1, 0)], [])

    def test_conflicting_edge(self):
        with pytest.raises(GraphError, match="conflicting"):
            build_graph([("a", 1, 0), ("b", 1, 0)], [("a", "b", 1), ("b", "a", 2)])

    def test_repeated_consistent_edge_ok(self):
        G = build_graph([("a", 1, 0), ("b", 1, 0)], [("a", "b", 2), ("b", "a", 2)])
        assert G.b[0, 1] == 2

    @pytest.mark.parametrize("m", [0.0, -1.0])
    def test_nonpositive_measure(self, m):
        with pytest.raises(GraphError, match="measure"):
            build_graph([("a", m, 0)], [])

    def test_negative_killing(self):
        with pytest.raises(GraphError, match="killing"):
            build_graph([("a", 1, -1)], [])

    def test_unknown_vertex_and_self_loop(self):
        with pytest.raises(GraphError, match="unknown"):
            build_graph([("a", 1, 0)], [("a", "z", 1)])
        with pytest.raises(GraphError, match="self loop"):
            build_graph([("a", 1, 0)], [("a", "a", 1)])

    def test_nonpositive_weight(self):
        with pytest.raises(GraphError, match="nonpositive"):
            build_graph([("a", 1, 0), ("b", 1, 0)], [("a", "b", 0)])

    def test_asymmetric_matrix_rejected(self):
        b = sp.csr_matrix(np.array([[0, 1.0], [2.0, 0]]))
        with pytest.raises(GraphError, match="symmetric"):
            WeightedGraph(("a", "b"), b, np.zeros(2), np.ones(2))

    def test_immutable(self):
        G = two_vertex()
        with pytest.raises(ValueError):
            G.m[0] = 3.0


class TestLaplacian:
    def test_single_vertex(self):
        np.testing.assert_allclose(apply_laplacian(single_vertex(4.0), [1.0]), [4.0])

    def test_constants_harmonic(self):
        G = lattice_box(2, 3)
        np.testing.assert_allclose(apply_laplacian(G, np.full(G.n, 2.5)), 0.0, atol=1e-14)

    def test_path_hand_value(self):
        np.testing.assert_allclose(apply_laplacian(path_abc(), [0, 1, 0]), [-1, 2, -1])

    def test_columns(self, rng):
        G = random_graph(rng, 12)
        F = rng.standard_normal((12, 3))
        cols = np.column_stack([apply_laplacian(G, F[:, k]) for k in range(3)])
        np.testing.assert_allclose(apply_laplacian(G, F), cols)

    def test_dimension_mismatch(self):
        with pytest.raises(GraphError):
            apply_laplacian(two_vertex(), [1.0, 2.0, 3.0])

    def test_quadratic_form_examples(self):
        assert quadratic_form(single_vertex(4.0), [1.0]) == 4.0
        G = lattice_box(2, 2)
        assert quadratic_form(G, np.ones(G.n)) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 40))
    def test_green_formula(self, seed, n):
        rng = np.random.default_rng(seed)
        G = random_graph(rng, n)
        f = rng.standard_normal(n)
        q = quadratic_form(G, f)
        rhs = float(np.sum(G.m * f * apply_laplacian(G, f)))
        assert abs(q - rhs) <= 1e-12 * max(1.0, abs(q))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 40))
    def test_killing_sum(self, seed, n):
        rng = np.random.default_rng(seed)
        G = random_graph(rng, n)
        f = rng.standard_normal(n)
        lhs = float(np.sum(G.m * apply_laplacian(G, f * f)))
        scale = float(np.sum((G.deg + G.c) * f * f))
        assert abs(lhs - float(np.sum(G.c * f * f))) <= 1e-12 * max(1.0, scale)


class TestMetric:
    def test_single_vertex(self):
        M = metric_annotation(single_vertex(), "o")
        assert M.dist.tolist() == [0]
        assert M.ball(0).tolist() == [0]

    def test_path_endpoint(self):
        G = path_graph(5)
        M = metric_annotation(G, G.ids[0])
        assert M.dist.tolist() == [0, 1, 2, 3, 4]

    def test_lattice_l1(self):
        G = lattice_box(2, 5)
        M = metric_annotation(G, "0:0")
        np.testing.assert_array_equal(M.dist, np.abs(G.coords).sum(axis=1))

    def test_balls_nested_and_exhaust(self):
        G = lattice_box(2, 3)
        M = metric_annotation(G, "0:0")
        for r in range(M.radius):
            assert set(M.ball(r)) <= set(M.ball(r + 1))
        assert M.ball(M.radius).size == G.n

    def test_unknown_root(self):
        with pytest.raises(GraphError):
            metric_annotation(two_vertex(), "zz")

    def test_edge_lipschitz_and_triangle(self, rng):
        G = random_graph(rng, 60)
        from scipy.sparse import csgraph

        D = csgraph.shortest_path(G.b, unweighted=True, directed=False).astype(int)
        for i, j, _ in G.edges():
            assert abs(D[0, i] - D[0, j]) <= 1
        for x, y, z in rng.integers(0, G.n, size=(1000, 3)):
            assert D[x, z] <= D[x, y] + D[y, z]
        M = metric_annotation(G, G.ids[0])
        np.testing.assert_array_equal(M.dist, D[0])


class TestDirichlet:
    def test_full_set_unchanged(self):
        G = path_abc()
        H = dirichlet_restriction(G, G.ids)
        assert (H.b != G.b).nnz == 0
        np.testing.assert_array_equal(H.c, G.c)

    def test_path_fold(self):
        H = dirichlet_restriction(path_abc(), ["a", "b"])
        assert H.ids == ("a", "b")
        assert H.b[0, 1] == 1
        np.testing.assert_array_equal(H.c, [0.0, 1.0])

    def test_empty_and_disconnected(self):
        with pytest.raises(GraphError):
            dirichlet_restriction(path_abc(), [])
        with pytest.raises(GraphError, match="disconnected"):
            dirichlet_restriction(path_abc(), ["a", "c"])

    def test_form_monotone(self, rng):
        G = lattice_box(2, 4)
        M = metric_annotation(G, "0:0")
        K, K2 = M.ball(2), M.ball(3)
        HK, HK2 = dirichlet_restriction(G, K), dirichlet_restriction(G, K2)
        f2 = np.zeros(K2.size)
        pos = {v: i for i, v in enumerate(K2)}
        vals = rng.standard_normal(K.size)
        for v, x in zip(K, vals):
            f2[pos[v]] = x
        assert quadratic_form(HK, vals) == pytest.approx(quadratic_form(HK2, f2), rel=1e-13)
        full = np.zeros(G.n)
        full[K] = vals
        assert quadratic_form(HK, vals) == pytest.approx(quadratic_form(G, full), rel=1e-13)

    def test_boundary_distance(self):
        from hardygraph.generators import dirichlet_box

        G = dirichlet_box(2, 5)
        assert boundary_distance(G, metric_annotation(G, "0:0")) == 5
