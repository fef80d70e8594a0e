import numpy as np
import pytest

from curvemorph.pca import flatten_configurations, pca_fit, pca_project, pca_reconstruct


class TestPcaFit:
    def test_rank_one_line(self):
        rng = np.random.default_rng(0)
        v = np.array([1.0, -2.0, 0.5, 3.0])
        v = v / np.linalg.norm(v)
        data = rng.normal(size=(20, 1)) * v
        model = pca_fit(data)
        assert model.eigenvalues[0] > 0
        assert model.eigenvalues[1:].max() < 1e-20
        assert abs(abs(model.loadings[0] @ v) - 1.0) < 1e-10

    def test_isotropic_symmetric_data(self):
        # three unit vectors at 120 degrees: both principal variances equal
        angles = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        data = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        model = pca_fit(data)
        assert model.eigenvalues[0] == pytest.approx(model.eigenvalues[1], abs=1e-10)

    def test_full_rank_roundtrip(self):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(10, 12))
        model = pca_fit(data)
        for i in range(10):
            recon, _ = pca_reconstruct(model, model.scores[i], model.k_max)
            assert np.max(np.abs(recon.reshape(-1) - data[i])) < 1e-8

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            pca_fit(np.ones((1, 6)))

    def test_loadings_orthonormal(self):
        rng = np.random.default_rng(2)
        model = pca_fit(rng.normal(size=(15, 9)))
        gram = model.loadings @ model.loadings.T
        assert np.max(np.abs(gram - np.eye(model.k_max))) < 1e-8


class TestPcaReconstruct:
    def test_zero_components_is_consensus(self):
        rng = np.random.default_rng(3)
        data = rng.normal(size=(8, 9))
        model = pca_fit(data)
        recon, consensus = pca_reconstruct(model, model.scores[0], 0)
        assert np.array_equal(recon, consensus)
        assert np.allclose(consensus.reshape(-1), data.mean(axis=0), atol=0)

    def test_error_nonincreasing_in_k(self):
        rng = np.random.default_rng(4)
        data = rng.normal(size=(12, 15))
        model = pca_fit(data)
        for i in range(12):
            errs = []
            for k in range(model.k_max + 1):
                recon, _ = pca_reconstruct(model, model.scores[i], k)
                errs.append(np.sum((recon.reshape(-1) - data[i]) ** 2))
            assert all(errs[j + 1] <= errs[j] + 1e-12 for j in range(len(errs) - 1))

    def test_k_out_of_range(self):
        model = pca_fit(np.random.default_rng(5).normal(size=(6, 6)))
        with pytest.raises(ValueError):
            pca_reconstruct(model, model.scores[0], model.k_max + 1)


class TestInvariants:
    def test_eigenvalue_sum_is_total_variance(self):
        rng = np.random.default_rng(6)
        data = rng.normal(size=(25, 10))
        model = pca_fit(data)
        centered = data - data.mean(axis=0)
        total = np.sum(centered**2) / (25 - 1)
        assert model.eigenvalues.sum() == pytest.approx(total, rel=1e-8)

    def test_scores_uncorrelated(self):
        rng = np.random.default_rng(7)
        model = pca_fit(rng.normal(size=(30, 8)))
        cov = model.scores.T @ model.scores / (30 - 1)
        off = cov - np.diag(np.diag(cov))
        assert np.max(np.abs(off)) < 1e-8 * model.eigenvalues[0]

    def test_truncation_error_identity(self):
        rng = np.random.default_rng(8)
        data = rng.normal(size=(20, 12))
        model = pca_fit(data)
        for k in (0, 3, 7, model.k_max):
            total_sq = 0.0
            for i in range(20):
                recon, _ = pca_reconstruct(model, model.scores[i], k)
                total_sq += np.sum((recon.reshape(-1) - data[i]) ** 2)
            expected = model.eigenvalues[k:].sum() * (20 - 1)
            assert total_sq == pytest.approx(expected, rel=1e-6, abs=1e-12)

    def test_project_matches_scores(self):
        rng = np.random.default_rng(9)
        data = rng.normal(size=(18, 7))
        model = pca_fit(data)
        assert np.max(np.abs(pca_project(model, data) - model.scores)) < 1e-10

    def test_flatten_order(self):
        pts = np.arange(18, dtype=float).reshape(1, 6, 3)
        flat = flatten_configurations(pts)
        assert np.array_equal(flat[0, :6], [0, 1, 2, 3, 4, 5])
