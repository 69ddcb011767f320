"""Tests for the oriented-graph layer and its spectral quantities."""

import numpy as np
import pytest

from bittide_sim.graph import (FiedlerResult, NotConnectedError, OrientedGraph,
                               complete, fiedler_vector, incidence_matrix,
                               laplacian, mesh, path, resistance_distance,
                               resistance_matrix, spectral_data)
from helpers import bfs_distance, random_connected_graph, union_find_connected


class TestOrientedGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            OrientedGraph(3, ((0, 0),))

    def test_rejects_duplicate_undirected(self):
        with pytest.raises(ValueError, match="duplicate"):
            OrientedGraph(3, ((0, 1), (1, 0)))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            OrientedGraph(2, ((0, 2),))

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            OrientedGraph(1, ())

    def test_neighbors(self):
        g = OrientedGraph(4, ((0, 1), (2, 1), (1, 3)))
        assert g.neighbors(1) == [0, 2, 3]
        assert g.neighbors(0) == [1]

    def test_directed_links_pairing(self):
        g = OrientedGraph(3, ((0, 1), (0, 2)))
        assert g.directed_links() == [(0, 1), (1, 0), (0, 2), (2, 0)]

    def test_connectivity(self):
        assert OrientedGraph(3, ((0, 1), (1, 2))).is_connected()
        assert not OrientedGraph(4, ((0, 1), (2, 3))).is_connected()


class TestGenerators:
    def test_complete_edge_count(self):
        assert complete(3).m == 3
        assert complete(5).m == 10

    def test_mesh_dimensions(self):
        g = mesh(4, 6)
        assert g.n == 24
        assert g.m == 38  # rows*(cols-1) + cols*(rows-1)

    def test_path_two_equals_complete_two(self):
        assert path(2).edges == complete(2).edges

    def test_orientation_lower_to_higher(self):
        for g in (complete(4), mesh(2, 3), path(5)):
            assert all(u < v for u, v in g.edges)

    def test_too_small(self):
        with pytest.raises(ValueError):
            complete(1)
        with pytest.raises(ValueError):
            path(1)
        with pytest.raises(ValueError):
            mesh(1, 1)


class TestIncidenceAndLaplacian:
    def test_single_edge_column(self):
        b = incidence_matrix(OrientedGraph(2, ((0, 1),)))
        assert np.array_equal(b, [[1.0], [-1.0]])

    def test_triangle_incidence(self):
        g = OrientedGraph(3, ((0, 1), (1, 2), (0, 2)))
        b = incidence_matrix(g)
        assert np.array_equal(b, [[1, 0, 1], [-1, 1, 0], [0, -1, -1]])

    def test_columns_sum_to_zero(self):
        g = random_connected_graph(np.random.RandomState(0), 10)
        b = incidence_matrix(g)
        assert np.array_equal(b.sum(axis=0), np.zeros(g.m))

    def test_triangle_laplacian(self):
        lap = laplacian(complete(3))
        assert np.array_equal(lap, 3 * np.eye(3) - np.ones((3, 3)))

    def test_path_laplacian(self):
        lap = laplacian(path(3))
        assert np.array_equal(lap, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_rank_n_minus_one(self):
        rng = np.random.RandomState(1)
        for _ in range(5):
            g = random_connected_graph(rng, rng.randint(2, 9))
            assert np.linalg.matrix_rank(laplacian(g)) == g.n - 1


class TestSpectralData:
    def test_triangle_eigenvalues(self):
        sd = spectral_data(complete(3))
        assert np.allclose(sd.eigenvalues, [0.0, 3.0, 3.0])

    def test_disconnected_raises(self):
        with pytest.raises(NotConnectedError):
            spectral_data(OrientedGraph(4, ((0, 1), (2, 3))))

    def test_edgeless_raises(self):
        with pytest.raises(NotConnectedError):
            spectral_data(OrientedGraph(2, ()))

    def test_pseudo_inverse_identities(self):
        rng = np.random.RandomState(2)
        for _ in range(5):
            sd = spectral_data(random_connected_graph(rng, rng.randint(3, 10)))
            lap, lp = sd.laplacian, sd.pseudo_inverse
            assert np.linalg.norm(lap @ lp @ lap - lap) <= 1e-10 * np.linalg.norm(lap)
            assert np.abs(lp @ np.ones(sd.graph.n)).max() <= 1e-10

    def test_basis_orthogonality(self):
        sd = spectral_data(mesh(3, 3))
        u1 = sd.disagreement_basis
        n = sd.graph.n
        assert np.abs(u1.T @ u1 - np.eye(n - 1)).max() <= 1e-12
        assert np.abs(u1.T @ np.ones(n)).max() <= 1e-12

    def test_full_basis_orthogonal(self):
        sd = spectral_data(complete(4))
        u = np.column_stack([sd.disagreement_basis, np.full(4, 0.5)])
        assert np.abs(u.T @ u - np.eye(4)).max() <= 1e-12

    def test_reduced_laplacian_positive_definite(self):
        rng = np.random.RandomState(3)
        for _ in range(5):
            sd = spectral_data(random_connected_graph(rng, rng.randint(2, 9)))
            assert np.linalg.eigvalsh(sd.reduced_laplacian).min() > 0

    def test_reduced_laplacian_reconstructs(self):
        sd = spectral_data(mesh(2, 4))
        u1 = sd.disagreement_basis
        rebuilt = u1 @ sd.reduced_laplacian @ u1.T
        assert np.abs(rebuilt - sd.laplacian).max() <= 1e-10

    def test_lambda2_positive_iff_connected(self):
        # union-find oracle against the spectrum, including disconnected graphs
        rng = np.random.RandomState(4)
        from bittide_sim.numerics import eig_symmetric
        for _ in range(20):
            n = rng.randint(2, 9)
            n_edges = rng.randint(0, n * (n - 1) // 2 + 1)
            pool = [(i, j) for i in range(n) for j in range(i + 1, n)]
            rng.shuffle(pool)
            g = OrientedGraph(n, tuple(pool[:n_edges]))
            w, _ = eig_symmetric(laplacian(g))
            connected = union_find_connected(n, g.edges)
            assert (w[1] > 1e-9) == connected


class TestResistanceDistance:
    def test_single_edge(self):
        sd = spectral_data(path(2))
        assert resistance_distance(sd, 0, 1) == pytest.approx(1.0, rel=1e-12)

    def test_triangle_series_parallel(self):
        # direct 1-ohm edge in parallel with the 2-ohm two-edge route
        sd = spectral_data(complete(3))
        assert resistance_distance(sd, 0, 1) == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_mesh_contains_quoted_pairs(self):
        sd = spectral_data(mesh(4, 6))
        r = resistance_matrix(sd)
        off = r[np.triu_indices(24, k=1)]
        assert np.any(np.abs(off - 0.700) <= 0.007)
        assert np.any(np.abs(off - 2.262) <= 0.02262)

    def test_symmetry_and_zero_diagonal(self):
        sd = spectral_data(mesh(3, 3))
        r = resistance_matrix(sd)
        assert np.abs(r - r.T).max() <= 1e-12
        assert np.abs(np.diag(r)).max() <= 1e-12

    def test_bounded_by_path_length(self):
        rng = np.random.RandomState(5)
        for _ in range(10):
            g = random_connected_graph(rng, rng.randint(3, 9))
            sd = spectral_data(g)
            for i in range(g.n):
                for j in range(i + 1, g.n):
                    assert resistance_distance(sd, i, j) <= bfs_distance(g, i, j) + 1e-10

    def test_triangle_inequality(self):
        rng = np.random.RandomState(6)
        for _ in range(10):
            g = random_connected_graph(rng, rng.randint(3, 9))
            r = resistance_matrix(spectral_data(g))
            for i in range(g.n):
                for j in range(g.n):
                    for k in range(g.n):
                        assert r[i, j] <= r[i, k] + r[k, j] + 1e-10

    def test_rayleigh_monotonicity(self):
        rng = np.random.RandomState(7)
        for _ in range(10):
            g = random_connected_graph(rng, rng.randint(3, 9), extra_edges=1)
            existing = {(min(u, v), max(u, v)) for u, v in g.edges}
            non_edges = [(i, j) for i in range(g.n) for j in range(i + 1, g.n)
                         if (i, j) not in existing]
            if not non_edges:
                continue
            r_before = resistance_matrix(spectral_data(g))
            extra = non_edges[rng.randint(len(non_edges))]
            g2 = OrientedGraph(g.n, g.edges + (extra,))
            r_after = resistance_matrix(spectral_data(g2))
            assert (r_after <= r_before + 1e-10).all()

    def test_index_out_of_range(self):
        sd = spectral_data(path(3))
        with pytest.raises(IndexError):
            resistance_distance(sd, 0, 3)


class TestFiedlerVector:
    def test_path_three(self):
        res = fiedler_vector(spectral_data(path(3)))
        assert isinstance(res, FiedlerResult)
        assert not res.degenerate
        assert res.algebraic_connectivity == pytest.approx(1.0, rel=1e-12)
        expected = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
        assert np.allclose(res.vector, expected, atol=1e-12)

    def test_complete_graph_degenerate(self):
        res = fiedler_vector(spectral_data(complete(4)))
        assert res.degenerate
        assert res.algebraic_connectivity == pytest.approx(4.0, rel=1e-12)

    def test_orthogonal_to_ones(self):
        rng = np.random.RandomState(8)
        for _ in range(10):
            g = random_connected_graph(rng, rng.randint(3, 10))
            res = fiedler_vector(spectral_data(g))
            assert abs(res.vector @ np.ones(g.n)) <= 1e-12
            assert np.linalg.norm(res.vector) == pytest.approx(1.0, abs=1e-12)

    def test_sign_convention_deterministic(self):
        res = fiedler_vector(spectral_data(mesh(4, 6)))
        nz = res.vector[np.abs(res.vector) > 1e-9]
        assert nz[0] > 0
