import numpy as np
import pytest

from curvemorph.basis import build_basis, evaluate, smooth
from curvemorph.curvetools import curve_from_points
from curvemorph.landmarks import LandmarkConfiguration
from curvemorph.pipelines import (
    PIPELINE_IDS,
    PipelineSettings,
    canonical_pipeline_id,
    evaluate_mse,
    fit_pipeline,
    reconstruct_specimen,
    run_pipeline,
    superimpose,
)
from curvemorph.simgen import SimConfig, generate_replicate

from helpers import phase_family, score_rel, separated_mode_family


class TestIdsAndSettings:
    def test_canonical_ids(self):
        assert canonical_pipeline_id("gm") == "GM"
        assert canonical_pipeline_id("arc-soft-srv-fdm") == "ArcSoftSrvFdm"
        assert canonical_pipeline_id("ELASTIC_SRV_FDM") == "ElasticSrvFdm"
        with pytest.raises(ValueError, match="unknown pipeline"):
            canonical_pipeline_id("pca")

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            PipelineSettings(alpha_soft=1.5)
        with pytest.raises(ValueError):
            PipelineSettings(n_points=2)

    def test_too_few_specimens(self):
        with pytest.raises(ValueError, match="at least 4"):
            fit_pipeline("GM", phase_family(n=3))

    def test_mismatched_landmark_counts(self):
        configs = phase_family(n=4) + phase_family(n=1, m=40)
        with pytest.raises(ValueError, match="landmark counts"):
            fit_pipeline("GM", configs)


class TestRunPipeline:
    def test_no_variance_error(self):
        pts = phase_family(n=1)[0].points
        identical = [LandmarkConfiguration(f"s{i}", pts.copy(), "g") for i in range(5)]
        with pytest.raises(ValueError, match="no variance"):
            run_pipeline("GM", identical)

    def test_simulation_k95_fdm_small_gm_large(self):
        data = generate_replicate(SimConfig(seed=20260811), 0)
        fdm = run_pipeline("FDM", data)
        gm = run_pipeline("GM", data)
        assert fdm.k95 <= 5
        assert gm.k95 >= 8
        assert fdm.k95 < gm.k95

    def test_output_shape_contract(self):
        data = phase_family(n=8)
        out = run_pipeline("FDM", data)
        assert out.scores.shape == (8, out.k95)
        assert out.reconstructions.shape == (8, 30, 3)
        assert out.mse_per_specimen.shape == (8,)
        assert out.mse_mean == pytest.approx(out.mse_per_specimen.mean())

    def test_all_pipelines_run(self):
        data = generate_replicate(SimConfig(group_sizes=(5, 5, 5, 5), n_points=20, seed=1), 0)
        settings = PipelineSettings(n_points=20)
        for pid in PIPELINE_IDS:
            out = run_pipeline(pid, data, settings)
            assert out.k95 >= 1 and np.all(np.isfinite(out.mse_per_specimen))


class TestReconstruction:
    def test_gm_full_rank_reproduces_processed(self):
        data = phase_family(n=8)
        out = run_pipeline("GM", data)
        fitted = out.fitted
        for i in range(4):
            recon = fitted.reconstruct(i, fitted.model.k_max)
            assert evaluate_mse(fitted.mse_target(i), recon, superimpose_first=False) < 1e-6

    def test_fdm_full_rank_reproduces_processed(self):
        data = phase_family(n=8)
        out = run_pipeline("FDM", data)
        fitted = out.fitted
        j_full = fitted.model.eigenvalues.shape[0]
        basis = build_basis()
        for i in range(4):
            recon = fitted.reconstruct(i, j_full)
            # the retained representation is lossless for this clean family
            smoothed = evaluate(smooth(curve_from_points(data[i].points), basis), fitted.grid)
            assert np.max(np.abs(recon - smoothed)) < 1e-6

    def test_zero_components_gives_mean_shape(self):
        data = phase_family(n=8)
        out = run_pipeline("GM", data)
        recon0 = out.fitted.reconstruct(0, 0)
        mean_shape = out.fitted.model.mean_vector.reshape(-1, 3)
        assert evaluate_mse(recon0, superimpose(mean_shape, recon0), superimpose_first=False) < 1e-12

    def test_elastic_roundtrip_fine_grid(self):
        data = phase_family(n=8, m=150, spread=0.4)
        out = run_pipeline("ElasticSrvFdm", data, PipelineSettings(n_points=150))
        assert out.mse_mean < 1e-3

    def test_mse_nonincreasing_in_components(self):
        data = phase_family(n=10)
        for pid in ("GM", "FDM"):
            out = run_pipeline(pid, data)
            fitted = out.fitted
            k_max = fitted.model.k_max if pid == "GM" else fitted.model.eigenvalues.shape[0]
            for i in (0, 3):
                errors = [
                    evaluate_mse(fitted.mse_target(i), fitted.reconstruct(i, k), superimpose_first=False)
                    for k in range(k_max + 1)
                ]
                for a, b in zip(errors, errors[1:]):
                    assert b <= a * (1 + 1e-6) + 1e-12

    def test_reconstruct_specimen_index_check(self):
        data = phase_family(n=6)
        out = run_pipeline("GM", data)
        assert np.array_equal(reconstruct_specimen(out, 2), out.reconstructions[2])
        with pytest.raises(ValueError, match="index"):
            reconstruct_specimen(out, 99)


class TestEvaluateMse:
    def test_identical_is_zero(self):
        pts = phase_family(n=1)[0].points
        assert evaluate_mse(pts, pts.copy()) < 1e-20

    def test_rotation_removed(self):
        rng = np.random.default_rng(0)
        from scipy.stats import special_ortho_group

        pts = phase_family(n=1)[0].points
        rotated = pts @ special_ortho_group.rvs(3, random_state=rng) + rng.normal(size=3)
        assert evaluate_mse(pts, rotated) < 1e-10

    def test_bypass_mode_measures_offset(self):
        pts = phase_family(n=1)[0].points
        eps = 0.01
        assert evaluate_mse(pts, pts + eps, superimpose_first=False) == pytest.approx(eps**2, rel=1e-12)

    def test_shape_mismatch(self):
        pts = phase_family(n=1)[0].points
        with pytest.raises(ValueError):
            evaluate_mse(pts, pts[:-1])


class TestTransformConsistency:
    @pytest.mark.parametrize("pid", ["GM", "FDM", "ArcGM", "ArcFDM"])
    def test_training_data_reproduces_scores(self, pid):
        data = phase_family(n=8, m=40)
        out = run_pipeline(pid, data, PipelineSettings(n_points=40))
        again = out.fitted.transform(data)
        assert np.max(np.abs(again - out.scores)) < 1e-8

    def test_elastic_training_data_close(self):
        data = phase_family(n=8, m=40, spread=0.4)
        out = run_pipeline("ElasticSrvFdm", data, PipelineSettings(n_points=40))
        again = out.fitted.transform(data)
        rel = np.linalg.norm(again - out.scores) / np.linalg.norm(out.scores)
        assert rel < 0.05


class TestPipelineInvariances:
    def test_arc_scores_invariant_to_sampling_speed(self):
        uniform = phase_family(n=8, m=120, power=1.0)
        squeezed = phase_family(n=8, m=120, power=2.0)
        for pid in ("ArcGM", "ArcFDM"):
            sa = run_pipeline(pid, uniform).scores
            sb = run_pipeline(pid, squeezed).scores
            assert score_rel(sa, sb) < 0.05

    def test_elastic_scores_invariant_to_random_warps(self):
        settings = PipelineSettings(n_points=80)
        base = run_pipeline("ElasticSrvFdm", separated_mode_family(), settings)
        warped = run_pipeline("ElasticSrvFdm", separated_mode_family(warp_seed=99), settings)
        assert score_rel(base.scores, warped.scores) < 0.05
