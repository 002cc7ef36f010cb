"""Rarity scoring against hand-computed values and the brute-force oracle."""

import numpy as np
import pytest

from graspforge.rarity import RarityConfig, knn, local_reachability_density, rarity_scores

from _oracles import knn_bruteforce, rarity_bruteforce


class TestKnn:
    def test_three_collinear_points(self):
        pts = np.array([[0.0], [1.0], [3.0]])
        idx, dist = knn(pts, 1)
        assert idx[:, 0].tolist() == [1, 0, 1]
        assert np.allclose(dist[:, 0], [1.0, 1.0, 2.0])

    def test_matches_bruteforce_on_random_set(self):
        rng = np.random.default_rng(30)
        pts = rng.normal(size=(200, 32))
        idx, dist = knn(pts, 7)
        oidx, odist = knn_bruteforce(pts, 7)
        assert np.array_equal(idx, oidx)
        assert np.max(np.abs(dist - odist)) < 1e-9

    def test_tie_break_prefers_lower_index(self):
        # three coincident points: neighbors ordered by index
        pts = np.zeros((3, 4))
        idx, dist = knn(pts, 2)
        assert idx[0].tolist() == [1, 2]
        assert idx[1].tolist() == [0, 2]
        assert idx[2].tolist() == [0, 1]
        assert np.all(dist == 0.0)

    def test_k_too_large_raises(self):
        with pytest.raises(ValueError, match="smaller"):
            knn(np.zeros((3, 2)), 3)


class TestLocalReachabilityDensity:
    def test_middle_of_collinear_points(self):
        # point 1 of {0, 1, 2} with k=2: mean distance 1 -> density 1
        _, dist = knn(np.array([[0.0], [1.0], [2.0]]), 2)
        density = local_reachability_density(dist)
        assert abs(density[1] - 1.0) < 1e-12

    def test_end_of_collinear_points(self):
        _, dist = knn(np.array([[0.0], [1.0], [2.0]]), 2)
        density = local_reachability_density(dist)
        assert abs(density[0] - 2.0 / 3.0) < 1e-12

    def test_duplicate_points_floored(self):
        pts = np.zeros((4, 3))
        _, dist = knn(pts, 2)
        density = local_reachability_density(dist, floor=1e-12)
        assert np.all(np.isfinite(density))
        scores = rarity_scores(pts, RarityConfig(k=2))
        assert np.all(np.isfinite(scores))

    def test_matches_formula_on_random_set(self):
        rng = np.random.default_rng(31)
        pts = rng.normal(size=(50, 8))
        idx, dist = knn(pts, 4)
        density = local_reachability_density(dist)
        for i in range(50):
            mean = np.mean([np.linalg.norm(pts[i] - pts[j]) for j in idx[i]])
            assert abs(density[i] - 1.0 / mean) < 1e-12


class TestRarityScores:
    def test_square_corners_all_one(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        scores = rarity_scores(pts, RarityConfig(k=2))
        assert np.allclose(scores, 1.0)

    def test_outlier_scores_high(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [10.0, 0.0]])
        scores = rarity_scores(pts, RarityConfig(k=2))
        assert scores[4] > 3.0
        assert np.all(scores[:4] < 1.5)

    def test_lattice_interior_points_near_one(self):
        xs, ys = np.meshgrid(np.arange(5.0), np.arange(5.0))
        pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
        scores = rarity_scores(pts, RarityConfig(k=4))
        interior = [i for i, p in enumerate(pts) if 0 < p[0] < 4 and 0 < p[1] < 4]
        assert np.all(scores[interior] >= 0.8)
        assert np.all(scores[interior] <= 1.25)

    def test_matches_bruteforce_oracle_many_instances(self):
        rng = np.random.default_rng(32)
        for _ in range(50):
            pts = rng.normal(size=(100, 6))
            got = rarity_scores(pts, RarityConfig(k=5))
            want = rarity_bruteforce(pts, 5)
            assert np.max(np.abs(got - want)) < 1e-9

    def test_invariant_under_rigid_rotation(self):
        rng = np.random.default_rng(33)
        pts = rng.normal(size=(60, 8))
        q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
        rotated = pts @ q.T
        a = rarity_scores(pts, RarityConfig(k=5))
        b = rarity_scores(rotated, RarityConfig(k=5))
        assert np.max(np.abs(a - b)) < 1e-9
