"""PCA scatter projection against an eigendecomposition oracle."""

import numpy as np
import pytest

from graspforge.geometry import pca_project


class TestPcaProject:
    def test_centered_2d_input_is_isometric(self):
        rng = np.random.default_rng(20)
        x = rng.normal(size=(30, 2))
        x -= x.mean(axis=0)
        proj = pca_project(x)
        d_in = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
        d_out = np.linalg.norm(proj[:, None, :] - proj[None, :, :], axis=2)
        assert np.max(np.abs(d_in - d_out)) < 1e-9

    def test_collinear_points_have_zero_second_component(self):
        t = np.linspace(-2, 2, 17)
        direction = np.array([1.0, 2.0, -0.5, 3.0])
        x = t[:, None] * direction[None, :]
        proj = pca_project(x)
        assert proj[:, 1].var() < 1e-18

    def test_reconstruction_error_equals_trailing_eigenvalues(self):
        rng = np.random.default_rng(21)
        x = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
        centered = x - x.mean(axis=0)
        proj = pca_project(x)
        # oracle: eigendecomposition of the scatter matrix
        eigvals = np.linalg.eigvalsh(centered.T @ centered)[::-1]
        residual = (centered ** 2).sum() - (proj ** 2).sum()
        assert abs(residual - eigvals[2:].sum()) < 1e-8

    def test_fewer_than_two_vectors_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            pca_project(np.ones((1, 4)))

    def test_deterministic_sign_convention(self):
        rng = np.random.default_rng(22)
        x = rng.normal(size=(25, 5))
        a = pca_project(x)
        b = pca_project(x.copy())
        assert np.array_equal(a, b)
