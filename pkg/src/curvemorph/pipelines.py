"""The eight morphometric pipelines: scores, truncated reconstructions, MSE.

Branches share three backbones.  GM-style pipelines run Procrustes alignment
and classical PCA on flattened coordinates.  FDM-style pipelines smooth each
coordinate function with a cubic B-spline basis and decompose with
multivariate FPCA.  Elastic pipelines first register curves to a Karcher
template in square-root velocity space (fully, or softened by an
identity blend), then feed the aligned amplitude curves through the FDM
backbone; reconstruction for those runs in SRVF space and maps back by time
integration.  Arc-prefixed variants reparameterise every curve to uniform
arc length before anything else.

Every fitted pipeline can project held-out specimens through its trained
transforms without refitting, which is what the cross-validation protocol
relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from curvemorph.basis import build_basis, evaluate, smooth
from curvemorph.curvetools import SampledCurve, arclength_reparameterise, curve_from_points, resample_uniform, uniform_params
from curvemorph.fpca import MfpcaModel, mfpca, mfpca_project, mfpca_reconstruct, select_components, ufpca
from curvemorph.landmarks import LandmarkConfiguration, align_to_reference, center, centroid_size, gpa, optimal_rotation
from curvemorph.pca import PcaModel, flatten_configurations, pca_fit, pca_project, pca_reconstruct
from curvemorph.srvf import SrvfCurve, estimate_warp, from_srvf, karcher_mean, rotation_align_srvf, soft_warp, to_srvf, warp_action

PIPELINE_IDS = (
    "GM",
    "ArcGM",
    "FDM",
    "ArcFDM",
    "SoftSrvFdm",
    "ArcSoftSrvFdm",
    "ElasticSrvFdm",
    "ArcElasticSrvFdm",
)

_CANONICAL = {pid.lower(): pid for pid in PIPELINE_IDS}


def canonical_pipeline_id(name: str) -> str:
    """Map case/hyphen/underscore variants (e.g. 'arc-soft-srv-fdm') to a pipeline id."""
    key = name.lower().replace("-", "").replace("_", "")
    if key not in _CANONICAL:
        raise ValueError(f"unknown pipeline {name!r}; valid: {', '.join(PIPELINE_IDS)}")
    return _CANONICAL[key]


@dataclass
class PipelineSettings:
    n_points: int = 30
    n_basis: int = 10
    variance_threshold: float = 0.95
    alpha_soft: float = 0.6
    lambda_soft: float = 0.01
    m_target: int = 30

    def __post_init__(self):
        if self.n_points < 3 or self.n_basis < 4:
            raise ValueError("n_points >= 3 and n_basis >= 4 required")
        if not 0.0 < self.variance_threshold <= 1.0:
            raise ValueError("variance_threshold must lie in (0, 1]")
        if not 0.0 <= self.alpha_soft <= 1.0:
            raise ValueError("alpha_soft must lie in [0, 1]")
        if self.lambda_soft < 0.0 or self.m_target < 1:
            raise ValueError("lambda_soft >= 0 and m_target >= 1 required")


@dataclass
class PipelineOutput:
    pipeline_id: str
    scores: np.ndarray  # (n, k95)
    k95: int
    eigenvalues: np.ndarray  # retained spectrum used for component selection
    reconstructions: np.ndarray  # (n, N, 3), superimposed onto the originals
    mse_per_specimen: np.ndarray
    mse_mean: float
    mse_sd: float
    fitted: "object" = field(repr=False, default=None)


def superimpose(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Full Procrustes fit (rotation + scale + translation) of source onto target."""
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    src_c = center(source)
    tgt_c = center(target)
    r, _ = optimal_rotation(src_c, tgt_c)
    denom = float(np.sum(src_c**2))
    beta = float(np.sum((src_c @ r) * tgt_c)) / denom if denom > 0 else 1.0
    return beta * src_c @ r + target.mean(axis=0)


def evaluate_mse(original: np.ndarray, reconstruction: np.ndarray, superimpose_first: bool = True) -> float:
    """Mean squared coordinate difference over all 3N entries.

    By default the reconstruction is Procrustes-superimposed (rigid + scale)
    onto the original first; pass ``superimpose_first=False`` to compare in
    place.
    """
    original = np.asarray(original, dtype=float)
    reconstruction = np.asarray(reconstruction, dtype=float)
    if original.shape != reconstruction.shape:
        raise ValueError("shape mismatch")
    if superimpose_first:
        reconstruction = superimpose(reconstruction, original)
    return float(np.mean((original - reconstruction) ** 2))


def _guard_variance(pipeline_id: str, eigenvalues: np.ndarray, scale: float) -> None:
    if float(np.sum(eigenvalues)) <= 1e-20 * max(1.0, scale):
        raise ValueError(f"{pipeline_id}: no variance")


def _preprocess(config: LandmarkConfiguration, settings: PipelineSettings, arc: bool) -> np.ndarray:
    """Common-grid point matrix for one specimen: resampled or arc-reparameterised."""
    curve = curve_from_points(config.points)
    if arc:
        return arclength_reparameterise(curve, settings.n_points).values
    if config.points.shape[0] == settings.n_points:
        return config.points.copy()
    return resample_uniform(curve, settings.n_points).values


# Warp searches in the elastic chains run on the native lattice; raise for
# finer warp quantization at roughly quadratic DP cost.
_DP_REFINE = 1


def _registration_basis_size(settings: PipelineSettings, m_in: int) -> int:
    """Richer basis for the registration path than for the representation.

    Registration needs fidelity (a coarse projection does not commute with
    warping); the representation keeps the parsimonious basis.
    """
    return max(settings.n_basis, min(2 * settings.n_basis, m_in - 1))


def _fit_coordinate_mfpca(
    values: np.ndarray,
    grid: np.ndarray,
    m_target: int,
    noise_covs: list[np.ndarray] | None = None,
    pve: float | None = None,
) -> MfpcaModel:
    """MFPCA of an (n, M, 3) stack: univariate fit per coordinate, then combined."""
    n, m, _ = values.shape
    j_p = min(n - 1, m, m_target)
    models = [
        ufpca(values[:, :, p], grid, j_p, noise_cov=None if noise_covs is None else noise_covs[p], pve=pve)
        for p in range(3)
    ]
    j_total = sum(u.eigenvalues.shape[0] for u in models)
    return mfpca(models, j_out=min(m_target, j_total))


def _smooth_stack(
    points_stack: list[np.ndarray], settings: PipelineSettings, grid: np.ndarray, n_basis: int | None = None
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Least-squares smooth every curve onto the grid.

    Also returns, per coordinate, the covariance the fit propagates from
    i.i.d. measurement noise (sigma^2 estimated from the pooled smoothing
    residuals; zero when the fit is saturated), used to keep noise out of
    downstream eigen-spectra.
    """
    basis = build_basis(n_basis if n_basis is not None else settings.n_basis)
    m_in = points_stack[0].shape[0]
    smoothed, rss = [], np.zeros(3)
    for pts in points_stack:
        fobj = smooth(curve_from_points(pts), basis)
        smoothed.append(evaluate(fobj, grid))
        fitted_at_input = evaluate(fobj, uniform_params(m_in))
        rss += np.sum((pts - fitted_at_input) ** 2, axis=0)
    dof = len(points_stack) * (m_in - basis.n_basis)
    sigma2 = rss / dof if dof > 0 else np.zeros(3)
    design_in = basis.design_matrix(uniform_params(m_in))
    design_out = basis.design_matrix(grid)
    propagate = design_out @ np.linalg.solve(design_in.T @ design_in, design_out.T)
    noise_covs = [s2 * propagate for s2 in sigma2]
    return np.stack(smoothed), noise_covs


# ---------------------------------------------------------------------------
# GM backbone

@dataclass
class GmFit:
    pipeline_id: str
    settings: PipelineSettings
    arc: bool
    consensus: np.ndarray
    model: PcaModel
    eigenvalues: np.ndarray
    k95: int
    targets: np.ndarray  # (n, N, 3) preprocessed raw-scale originals

    @property
    def scores(self) -> np.ndarray:
        return self.model.scores[:, : self.k95]

    def transform(self, configs: list[LandmarkConfiguration]) -> np.ndarray:
        rows = []
        for cfg in configs:
            pts = _preprocess(cfg, self.settings, self.arc)
            aligned = align_to_reference(pts, self.consensus)
            rows.append(aligned.reshape(-1))
        return pca_project(self.model, np.stack(rows))[:, : self.k95]

    def reconstruct(self, index: int, k: int | None = None) -> np.ndarray:
        k = self.k95 if k is None else k
        recon, _ = pca_reconstruct(self.model, self.model.scores[index], k)
        return superimpose(recon, self.targets[index])

    def mse_target(self, index: int) -> np.ndarray:
        return self.targets[index]


def _fit_gm(pipeline_id: str, configs: list[LandmarkConfiguration], settings: PipelineSettings, arc: bool) -> GmFit:
    targets = np.stack([_preprocess(c, settings, arc) for c in configs])
    shaped = [LandmarkConfiguration(c.specimen_id, targets[i], c.label) for i, c in enumerate(configs)]
    result = gpa(shaped)
    flat = flatten_configurations(np.stack([a.points for a in result.aligned]))
    model = pca_fit(flat)
    retained = model.eigenvalues[: min(settings.m_target, model.k_max)]
    _guard_variance(pipeline_id, retained, float(np.mean(flat**2)))
    k95 = select_components(retained, settings.variance_threshold)
    return GmFit(pipeline_id, settings, arc, result.consensus, model, retained, k95, targets)


# ---------------------------------------------------------------------------
# FDM backbone

@dataclass
class FdmFit:
    pipeline_id: str
    settings: PipelineSettings
    arc: bool
    grid: np.ndarray
    model: MfpcaModel
    eigenvalues: np.ndarray
    k95: int
    targets: np.ndarray  # (n, M, 3) full-rank functional representations

    @property
    def scores(self) -> np.ndarray:
        return self.model.scores[:, : self.k95]

    def transform(self, configs: list[LandmarkConfiguration]) -> np.ndarray:
        pts = [_preprocess(c, self.settings, self.arc) for c in configs]
        smoothed, _ = _smooth_stack(pts, self.settings, self.grid)
        blocks = [smoothed[:, :, p] for p in range(3)]
        return mfpca_project(self.model, blocks)[:, : self.k95]

    def reconstruct(self, index: int, k: int | None = None) -> np.ndarray:
        k = self.k95 if k is None else k
        recon = mfpca_reconstruct(self.model, self.model.scores[index], k)[0]
        return superimpose(recon, self.targets[index])

    def mse_target(self, index: int) -> np.ndarray:
        return self.targets[index]


def _fit_fdm(pipeline_id: str, configs: list[LandmarkConfiguration], settings: PipelineSettings, arc: bool) -> FdmFit:
    grid = uniform_params(settings.n_points)
    pts = [_preprocess(c, settings, arc) for c in configs]
    smoothed, noise_covs = _smooth_stack(pts, settings, grid)
    # The univariate step both corrects the spectrum for smoothing-propagated
    # measurement noise and downgrades the retained components by the same
    # cumulative-variance rule used everywhere else.
    model = _fit_coordinate_mfpca(smoothed, grid, settings.m_target, noise_covs, settings.variance_threshold)
    _guard_variance(pipeline_id, model.eigenvalues, float(np.mean(smoothed**2)))
    k95 = select_components(model.eigenvalues, settings.variance_threshold)
    # The specimen as the model represents it: its full-rank expansion.
    targets = mfpca_reconstruct(model, model.scores, model.eigenvalues.shape[0])
    return FdmFit(pipeline_id, settings, arc, grid, model, model.eigenvalues, k95, targets)


# ---------------------------------------------------------------------------
# elastic backbone

def _recenter(values: np.ndarray) -> np.ndarray:
    return values - values.mean(axis=0)


@dataclass
class ElasticFit:
    pipeline_id: str
    settings: PipelineSettings
    arc: bool
    lam: float
    alpha: float
    consensus: np.ndarray
    template: SrvfCurve
    grid: np.ndarray
    model: MfpcaModel  # amplitude-curve model (classification scores)
    eigenvalues: np.ndarray
    k95: int
    srvf_model: MfpcaModel  # SRVF-space model (reconstruction path)
    srvf_eigenvalues: np.ndarray
    srvf_k95: int
    sizes: np.ndarray  # raw centroid sizes, one per specimen
    amplitudes: np.ndarray  # (n, M, 3) aligned amplitude curves, unit scale
    targets: np.ndarray  # smoothed aligned amplitude curves at raw scale

    @property
    def scores(self) -> np.ndarray:
        return self.model.scores[:, : self.k95]

    def _align_amplitude(self, pts: np.ndarray) -> np.ndarray:
        """Register one smoothed unit-size configuration to the trained template."""
        k_reg = _registration_basis_size(self.settings, pts.shape[0])
        smoothed, _ = _smooth_stack([pts], self.settings, self.grid, n_basis=k_reg)
        q = to_srvf(SampledCurve(self.grid.copy(), smoothed[0]))
        # Two rotation/warp alternations; the second rotation sees
        # warp-corrected correspondence.
        q_rot, _ = rotation_align_srvf(q, self.template)
        warp = estimate_warp(self.template, q_rot, self.lam, refine=_DP_REFINE)
        _, r = rotation_align_srvf(warp_action(q_rot, warp), self.template)
        q_rot = SrvfCurve(q_rot.params, q_rot.q @ r)
        warp = estimate_warp(self.template, q_rot, self.lam, refine=_DP_REFINE)
        if self.alpha < 1.0:
            warp = soft_warp(warp, self.alpha)
        aligned = warp_action(q_rot, warp)
        return _recenter(from_srvf(aligned, np.zeros(3)).values)

    def transform(self, configs: list[LandmarkConfiguration]) -> np.ndarray:
        amps = []
        for cfg in configs:
            pts = _preprocess(cfg, self.settings, self.arc)
            aligned_pts = align_to_reference(pts, self.consensus)
            amps.append(self._align_amplitude(aligned_pts))
        smoothed, _ = _smooth_stack(amps, self.settings, self.grid)
        blocks = [smoothed[:, :, p] for p in range(3)]
        return mfpca_project(self.model, blocks)[:, : self.k95]

    def _integrate_q(self, q_values: np.ndarray, index: int) -> np.ndarray:
        curve = from_srvf(SrvfCurve(self.grid.copy(), q_values), np.zeros(3))
        return _recenter(curve.values) * self.sizes[index]

    def reconstruct(self, index: int, k: int | None = None) -> np.ndarray:
        k = self.srvf_k95 if k is None else k
        q_hat = mfpca_reconstruct(self.srvf_model, self.srvf_model.scores[index], k)[0]
        return superimpose(self._integrate_q(q_hat, index), self.targets[index])

    def mse_target(self, index: int) -> np.ndarray:
        return self.targets[index]


def _fit_elastic(
    pipeline_id: str,
    configs: list[LandmarkConfiguration],
    settings: PipelineSettings,
    arc: bool,
    lam: float,
    alpha: float,
) -> ElasticFit:
    pts = [_preprocess(c, settings, arc) for c in configs]
    shaped = [LandmarkConfiguration(c.specimen_id, pts[i], c.label) for i, c in enumerate(configs)]
    result = gpa(shaped)
    grid = uniform_params(settings.n_points)
    # Smooth before differentiating: SRVFs of raw noisy polylines are
    # noise-dominated and would drive the warp search.
    k_reg = _registration_basis_size(settings, result.aligned[0].n_landmarks)
    smoothed_aligned, _ = _smooth_stack([a.points for a in result.aligned], settings, grid, n_basis=k_reg)
    qs = [to_srvf(SampledCurve(grid.copy(), smoothed_aligned[i])) for i in range(len(configs))]
    registration = karcher_mean(qs, lam=lam, alpha=alpha, refine=_DP_REFINE)

    amplitudes = np.stack([_recenter(from_srvf(q, np.zeros(3)).values) for q in registration.aligned])
    sizes = result.centroid_sizes

    # Amplitude and SRVF functions carry transformed (non-i.i.d.) noise, so
    # their spectra use the plain estimator.
    smoothed, _ = _smooth_stack(list(amplitudes), settings, grid)
    model = _fit_coordinate_mfpca(smoothed, grid, settings.m_target)
    _guard_variance(pipeline_id, model.eigenvalues, float(np.mean(smoothed**2)))
    k95 = select_components(model.eigenvalues, settings.variance_threshold)

    # SRVF-space decomposition for the reconstruction path, built from the
    # same smoothed aligned amplitudes the representation uses.
    q_stack = np.stack([to_srvf(SampledCurve(grid.copy(), smoothed[i])).q for i in range(len(configs))])
    srvf_model = _fit_coordinate_mfpca(q_stack, grid, settings.m_target)
    _guard_variance(pipeline_id, srvf_model.eigenvalues, float(np.mean(q_stack**2)))
    srvf_k95 = select_components(srvf_model.eigenvalues, settings.variance_threshold)

    return ElasticFit(
        pipeline_id=pipeline_id,
        settings=settings,
        arc=arc,
        lam=lam,
        alpha=alpha,
        consensus=result.consensus,
        template=registration.template,
        grid=grid,
        model=model,
        eigenvalues=model.eigenvalues,
        k95=k95,
        srvf_model=srvf_model,
        srvf_eigenvalues=srvf_model.eigenvalues,
        srvf_k95=srvf_k95,
        sizes=sizes,
        amplitudes=amplitudes,
        targets=smoothed * sizes[:, None, None],
    )


# ---------------------------------------------------------------------------
# dispatch

def fit_pipeline(pipeline_id: str, configs: list[LandmarkConfiguration], settings: PipelineSettings | None = None):
    pipeline_id = canonical_pipeline_id(pipeline_id)
    settings = settings or PipelineSettings()
    if len(configs) < 4:
        raise ValueError(f"{pipeline_id}: need at least 4 specimens")
    n_landmarks = configs[0].n_landmarks
    if any(c.n_landmarks != n_landmarks for c in configs):
        raise ValueError(f"{pipeline_id}: landmark counts differ across specimens")

    arc = pipeline_id.startswith("Arc")
    try:
        if pipeline_id in ("GM", "ArcGM"):
            return _fit_gm(pipeline_id, configs, settings, arc)
        if pipeline_id in ("FDM", "ArcFDM"):
            return _fit_fdm(pipeline_id, configs, settings, arc)
        if pipeline_id in ("ElasticSrvFdm", "ArcElasticSrvFdm"):
            return _fit_elastic(pipeline_id, configs, settings, arc, lam=0.0, alpha=1.0)
        return _fit_elastic(pipeline_id, configs, settings, arc, lam=settings.lambda_soft, alpha=settings.alpha_soft)
    except ValueError as exc:
        if str(exc).startswith(pipeline_id):
            raise
        raise ValueError(f"{pipeline_id}: {exc}") from exc


def run_pipeline(
    pipeline_id: str,
    dataset: list[LandmarkConfiguration],
    settings: PipelineSettings | None = None,
) -> PipelineOutput:
    """Fit one pipeline on a dataset and assemble scores, reconstructions, and MSE."""
    fitted = fit_pipeline(pipeline_id, dataset, settings)
    n = len(dataset)
    recons = np.stack([fitted.reconstruct(i) for i in range(n)])
    mse = np.array([evaluate_mse(fitted.mse_target(i), recons[i], superimpose_first=False) for i in range(n)])
    return PipelineOutput(
        pipeline_id=fitted.pipeline_id,
        scores=fitted.scores,
        k95=fitted.k95,
        eigenvalues=fitted.eigenvalues,
        reconstructions=recons,
        mse_per_specimen=mse,
        mse_mean=float(mse.mean()),
        mse_sd=float(mse.std(ddof=1)) if n > 1 else 0.0,
        fitted=fitted,
    )


def reconstruct_specimen(output: PipelineOutput, index: int, k: int | None = None) -> np.ndarray:
    """Branch-specific truncated reconstruction of one specimen."""
    if not 0 <= index < output.reconstructions.shape[0]:
        raise ValueError("specimen index out of range")
    if k is None:
        return output.reconstructions[index]
    return output.fitted.reconstruct(index, k)
