"""Spectral coarsening: Laplacians, eigen machinery, greedy agglomeration."""

import numpy as np
import pytest

from parkcoarse import coarsen as cz
from parkcoarse.errors import ConfigError, NumericError, ShapeError


def random_geometric(n, seed, radius=0.35, self_loops=True):
    """Symmetric reciprocal-distance weights for points in the unit square."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, (n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    w = np.where((dist <= radius) & (dist > 0), 1.0 / np.maximum(dist, 0.05), 0.0)
    w = (w + w.T) / 2
    if self_loops:
        w += np.eye(n)
    return w


class TestNormalizedLaplacian:
    def test_two_clique(self):
        cache = cz.normalized_laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(cache.laplacian, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)

    def test_diagonal_without_self_loops_is_one(self):
        a = random_geometric(10, 0, radius=0.9, self_loops=False)
        assert not np.any(a.sum(1) == 0)
        cache = cz.normalized_laplacian(a)
        np.testing.assert_allclose(np.diag(cache.laplacian), 1.0, atol=1e-12)

    def test_diagonal_with_self_loops(self):
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        cache = cz.normalized_laplacian(a)
        # diag = 1 - w_ii / d_i with d_i = 3
        np.testing.assert_allclose(np.diag(cache.laplacian), 1.0 - 2.0 / 3.0, atol=1e-15)

    def test_symmetrizes_directed_input(self):
        a = np.array([[0.0, 1.0], [0.2, 0.0]])
        cache = cz.normalized_laplacian(a)
        np.testing.assert_allclose(cache.laplacian, cache.laplacian.T, atol=1e-15)

    def test_zero_degree_rejected(self):
        with pytest.raises(NumericError):
            cz.normalized_laplacian(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_disconnected_components_zero_multiplicity(self):
        a = np.zeros((4, 4))
        a[0, 1] = a[1, 0] = 1.0
        a[2, 3] = a[3, 2] = 1.0
        vals = cz.laplacian_eigenvalues(a)
        assert (np.abs(vals) < 1e-10).sum() == 2


class TestEigenDecompose:
    def test_p3_eigenvalues(self):
        a = np.array([[0.0, 1, 0], [1, 0, 1], [0, 1, 0]])
        np.testing.assert_allclose(cz.laplacian_eigenvalues(a), [0.0, 1.0, 2.0], atol=1e-12)

    def test_k2_eigenvalues(self):
        np.testing.assert_allclose(
            cz.laplacian_eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]])), [0.0, 2.0], atol=1e-12)

    def test_orthonormal_eigenvectors(self):
        cache = cz.normalized_laplacian(random_geometric(12, 3))
        _, vecs = cz.eigen_decompose(cache)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(12), atol=1e-8)

    def test_residual_of_retained_pairs(self):
        cache = cz.normalized_laplacian(random_geometric(15, 4))
        vals, vecs = cz.eigen_decompose(cache)
        for k in range(15):
            residual = cache.laplacian @ vecs[:, k] - vals[k] * vecs[:, k]
            assert np.abs(residual).max() < 1e-8

    def test_leading_trailing_subsets(self):
        cache = cz.normalized_laplacian(random_geometric(10, 5))
        lead_vals, lead_vecs, trail_vals, trail_vecs = cz.eigen_decompose(cache, k_lo=4, k_hi=7)
        full_vals, full_vecs = cz.eigen_decompose(cache)
        np.testing.assert_array_equal(lead_vals, full_vals[:4])
        np.testing.assert_array_equal(trail_vals, full_vals[3:])
        assert lead_vecs.shape == (10, 4) and trail_vecs.shape == (10, 7)

    def test_eigenvalue_range(self):
        for seed in range(10):
            vals = cz.laplacian_eigenvalues(random_geometric(20, seed))
            assert vals.min() >= -1e-9 and vals.max() <= 2 + 1e-9


class TestCosineSimilarity:
    def test_identical(self):
        assert cz.cosine_similarity(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cz.cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_value(self):
        assert cz.cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(0.707107, abs=1e-6)

    def test_zero_vector_rejected(self):
        with pytest.raises(NumericError):
            cz.cosine_similarity(np.zeros(2), np.ones(2))


class TestSpectralDistance:
    K2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    P3 = np.array([[0.0, 1, 0], [1, 0, 1], [0, 1, 0]])

    def test_self_distance_zero(self):
        assert cz.spectral_distance(self.P3, self.P3, 3) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        assert cz.spectral_distance(self.K2, self.P3, 2) == pytest.approx(
            cz.spectral_distance(self.P3, self.K2, 2))

    def test_k2_vs_p3(self):
        assert cz.spectral_distance(self.K2, self.P3, 2) == pytest.approx(1.0, abs=1e-9)

    def test_invalid_k(self):
        with pytest.raises(ConfigError):
            cz.spectral_distance(self.K2, self.P3, 3)


def connected_in(a_sym, members):
    members = list(members)
    seen = {members[0]}
    todo = [members[0]]
    mset = set(members)
    while todo:
        x = todo.pop()
        for y in mset - seen:
            if a_sym[x, y] > 0:
                seen.add(y)
                todo.append(y)
    return len(seen) == len(mset)


class TestCoarsen:
    def test_identity_at_ratio_one(self):
        a = random_geometric(8, 0)
        g = cz.coarsen(a, 1.0)
        assert g.index == [[i] for i in range(8)]
        np.testing.assert_allclose(g.adjacency, (a + a.T) / 2)
        assert g.spectral_dist == 0.0

    def test_k2_single_hypernode_self_weight(self):
        g = cz.coarsen(np.array([[0.0, 0.7], [0.7, 0.0]]), 0.5)
        assert g.index == [[0, 1]]
        np.testing.assert_allclose(g.adjacency, [[1.4]])

    def test_disconnected_triangles_found_exactly(self):
        tri = np.zeros((6, 6))
        for x, y in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
            tri[x, y] = tri[y, x] = 1.0
        g = cz.coarsen(tri, 1 / 3)
        assert g.index == [[0, 1, 2], [3, 4, 5]]
        assert g.spectral_dist < 1e-9

    def test_ratio_out_of_range(self):
        for bad in (0.0, -0.5, 1.2):
            with pytest.raises(ConfigError):
                cz.coarsen(np.eye(3), bad)

    def test_determinism(self):
        a = random_geometric(25, 9)
        g1 = cz.coarsen(a, 0.4)
        g2 = cz.coarsen(a.copy(), 0.4)
        assert g1.index == g2.index
        np.testing.assert_array_equal(g1.adjacency, g2.adjacency)

    def test_tie_break_prefers_lowest_pair(self):
        # identical embeddings make every pair cosine 1; (0, 1) must merge first
        embed = np.ones((3, 2))
        support = np.ones((3, 3), dtype=bool)
        index = cz._greedy_merge(embed, support, 2)
        assert index == [[0, 1], [2]]

    @pytest.mark.parametrize("ratio", [0.3, 0.6, 0.9])
    def test_partition_weight_connectivity(self, ratio):
        for seed in range(8):
            a = random_geometric(24, seed)
            a_sym = (a + a.T) / 2
            g = cz.coarsen(a, ratio)
            flat = sorted(m for block in g.index for m in block)
            assert flat == list(range(24))                       # partition: disjoint + total
            assert all(len(block) > 0 for block in g.index)
            assert abs(g.adjacency.sum() - a_sym.sum()) <= 1e-9  # weight preserved
            support = a_sym > 0
            for block in g.index:
                assert connected_in(support, block)

    def test_median_sd_monotone_in_ratio(self):
        sds = {0.3: [], 0.6: [], 0.9: []}
        for seed in range(10):
            a = random_geometric(30, 100 + seed)
            for ratio in sds:
                sds[ratio].append(cz.coarsen(a, ratio).spectral_dist)
        med = {r: np.median(v) for r, v in sds.items()}
        assert med[0.9] <= med[0.6] <= med[0.3]


class TestHypernodeFeatures:
    def make_features(self, t=5, n=4, f=4):
        return np.arange(t * n * f, dtype=np.float64).reshape(t, n, f)

    def test_singleton_slice(self):
        x = self.make_features()
        out = cz.hypernode_features(x, [[2], [0], [1], [3]])
        np.testing.assert_array_equal(out[0], x[:, 2, :])

    def test_two_member_ordering(self):
        x = self.make_features()
        out = cz.hypernode_features(x, [[1, 0], [2, 3]])
        assert out[0].shape == (5, 8)
        np.testing.assert_array_equal(out[0][:, :4], x[:, 0, :])  # lower lot id first
        np.testing.assert_array_equal(out[0][:, 4:], x[:, 1, :])

    def test_input_order_canonicalized(self):
        x = self.make_features()
        a = cz.hypernode_features(x, [[3, 1, 0], [2]])
        b = cz.hypernode_features(x, [[0, 1, 3], [2]])
        np.testing.assert_array_equal(a[0], b[0])

    def test_partition_violations_rejected(self):
        x = self.make_features()
        with pytest.raises(ShapeError):
            cz.hypernode_features(x, [[0, 1], [1, 2], [3]])
        with pytest.raises(ShapeError):
            cz.hypernode_features(x, [[0, 1], [2]])
        with pytest.raises(ShapeError):
            cz.hypernode_features(x, [[0, 1], [2, 7]])


def test_export_coarse_roundtrip(tmp_path):
    g = cz.coarsen(random_geometric(10, 1), 0.5)
    adj_path = tmp_path / "ac.txt"
    idx_path = tmp_path / "index.txt"
    cz.export_coarse(g, adj_path, idx_path)
    rebuilt = np.zeros_like(g.adjacency)
    for line in adj_path.read_text().strip().splitlines():
        i, j, v = line.split()
        rebuilt[int(i), int(j)] = float(v)
    np.testing.assert_array_equal(rebuilt, g.adjacency)
    lines = idx_path.read_text().strip().splitlines()
    assert len(lines) == g.n_hypernodes
    assert lines[0].startswith("0:")
