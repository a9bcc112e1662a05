//! Synthetic scenes, evaluation metrics, the depth/focal ambiguity sweep and
//! the seeded benchmark harness.
//!
//! All randomness comes from ChaCha8 generators seeded with
//! `ChaCha8Rng::seed_from_u64`. Trial `i` of a benchmark with seed `s` uses
//! seed `s + i` (wrapping); scene sampling draws from stream 0 of that seed
//! and the initial-state perturbation from stream 1.

use crate::alignment::{
    vertex_correspondences, AlignmentContext, AlignmentError, AlignmentProvider, Correspondence,
    FdSteps, GaussNewtonProvider, SilhouetteFdProvider,
};
use crate::geometry::{
    geodesic_distance, project_point, transform_point, CameraIntrinsics, Pose, Rotation, Vec3,
    DEPTH_EPSILON,
};
use crate::mesh::Mesh;
use crate::refiner::{
    init_state, refine, InitError, RefineError, RefinementConfig, RefinementState,
    RefinementTrajectory, Termination,
};
use crate::renderer::{projected_bbox, render_silhouette, silhouette_iou, RenderError, SilhouetteImage};
use crate::reparam::{reannotate, AnnotatedScene, ReparamError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

const MAX_SAMPLING_RETRIES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("could not place the mesh in front of the camera after {0} attempts")]
    SamplingExhausted(usize),
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("state depth k = {state_k} does not match ground truth {gt_k:?}")]
    KMismatch { state_k: f64, gt_k: Option<f64> },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("alpha values must be positive and include 1.0")]
    InvalidAlphas,
    #[error("benchmark needs at least one trial and one mesh")]
    EmptyBenchmark,
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Reparam(#[from] ReparamError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Init(#[from] InitError),
}

/// A mesh with the reference recorded in scene annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMesh {
    pub name: String,
    pub mesh: Mesh,
}

impl NamedMesh {
    pub fn new(name: impl Into<String>, mesh: Mesh) -> Self {
        Self {
            name: name.into(),
            mesh,
        }
    }

    /// One of the procedural meshes, referenced as `builtin:<name>`.
    pub fn builtin(name: &str) -> Option<Self> {
        Mesh::builtin(name).map(|m| Self::new(format!("builtin:{name}"), m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSamplerConfig {
    /// Metric object depth range, meters.
    pub tz_range: (f64, f64),
    /// Metric focal length range, pixels.
    pub f_range: (f64, f64),
    /// Maximum object-center offset from the principal point, as a fraction
    /// of the image width (horizontal) and height (vertical).
    pub xy_offset: f64,
    pub width: u32,
    pub height: u32,
    /// Depth the sampled scene is re-annotated to.
    pub k: f64,
    pub seed: u64,
}

impl Default for SceneSamplerConfig {
    fn default() -> Self {
        Self {
            tz_range: (1.0, 4.0),
            f_range: (300.0, 1500.0),
            xy_offset: 0.2,
            width: 640,
            height: 480,
            k: crate::reparam::DEFAULT_K,
            seed: 0,
        }
    }
}

impl SceneSamplerConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
        if !ordered(self.tz_range) || !ordered(self.f_range) {
            return Err(ExperimentError::InvalidConfig("ranges must be positive and ordered".into()));
        }
        if !(self.xy_offset.is_finite() && self.xy_offset >= 0.0) {
            return Err(ExperimentError::InvalidConfig("xy offset must be non-negative".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ExperimentError::InvalidConfig("image size must be positive".into()));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(ExperimentError::InvalidConfig("k must be positive".into()));
        }
        Ok(())
    }
}

/// A sampled scene in metric and re-annotated form. The observation and the
/// correspondences are produced from the re-annotated ground truth, which is
/// the state the refiner is expected to recover.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub metric: AnnotatedScene,
    pub scene: AnnotatedScene,
    pub observation: SilhouetteImage,
    pub correspondences: Vec<Correspondence>,
}

impl SyntheticScene {
    /// Renders the observation and vertex correspondences of `scene`, which
    /// must already be re-annotated.
    pub fn observe(
        metric: AnnotatedScene,
        scene: AnnotatedScene,
        mesh: &Mesh,
    ) -> Result<Self, ExperimentError> {
        let observation = render_silhouette(mesh, &scene.pose, &scene.intrinsics)?;
        let correspondences = vertex_correspondences(mesh, &scene.pose, &scene.intrinsics)?;
        Ok(Self {
            metric,
            scene,
            observation,
            correspondences,
        })
    }

    pub fn ground_truth(&self) -> RefinementState {
        RefinementState::from_pose(&self.scene.pose, self.scene.intrinsics.f)
    }
}

/// Uniformly distributed rotation (Shoemake's subgroup algorithm).
pub fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
    Rotation::from_wxyz([b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin()])
        .expect("unit quaternion by construction")
}

/// Uniformly distributed unit vector.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn in_front(mesh: &Mesh, pose: &Pose) -> bool {
    mesh.vertices()
        .iter()
        .all(|v| transform_point(v, pose).z > DEPTH_EPSILON)
}

/// Samples a metric scene within the configured ranges.
pub fn sample_metric_scene<R: Rng + ?Sized>(
    cfg: &SceneSamplerConfig,
    mesh: &NamedMesh,
    rng: &mut R,
) -> Result<AnnotatedScene, ExperimentError> {
    cfg.validate()?;
    if mesh.mesh.is_empty() {
        return Err(ExperimentError::EmptyMesh);
    }
    for _ in 0..MAX_SAMPLING_RETRIES {
        let rotation = uniform_rotation(rng);
        let tz = rng.gen_range(cfg.tz_range.0..=cfg.tz_range.1);
        let f = rng.gen_range(cfg.f_range.0..=cfg.f_range.1);
        let du = rng.gen_range(-cfg.xy_offset..=cfg.xy_offset) * f64::from(cfg.width);
        let dv = rng.gen_range(-cfg.xy_offset..=cfg.xy_offset) * f64::from(cfg.height);
        let intrinsics = CameraIntrinsics::centered(f, cfg.width, cfg.height);
        let pose = Pose::new(rotation, Vec3::new(du * tz / f, dv * tz / f, tz));
        let k_pose = Pose::new(rotation, Vec3::new(pose.translation.x, pose.translation.y, cfg.k));
        if in_front(&mesh.mesh, &pose) && in_front(&mesh.mesh, &k_pose) {
            return Ok(AnnotatedScene {
                mesh_path: mesh.name.clone().into(),
                intrinsics,
                pose,
                reparam_k: None,
            });
        }
    }
    Err(ExperimentError::SamplingExhausted(MAX_SAMPLING_RETRIES))
}

/// Samples a scene from `cfg.seed`, re-annotates it to `cfg.k` and renders
/// the observation from the re-annotated ground truth.
pub fn generate_scene(
    cfg: &SceneSamplerConfig,
    mesh: &NamedMesh,
) -> Result<SyntheticScene, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let metric = sample_metric_scene(cfg, mesh, &mut rng)?;
    let scene = reannotate(&metric, cfg.k)?;
    SyntheticScene::observe(metric, scene, &mesh.mesh)
}

/// Errors of a refined state against re-annotated ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseMetrics {
    pub focal_rel_error: f64,
    pub rotation_error: f64,
    pub xy_error: f64,
    pub reproj_rmse: f64,
}

/// Vertex reprojection RMSE between two states sharing the principal point
/// and image size of `base`.
pub fn reprojection_rmse(
    a: &RefinementState,
    b: &RefinementState,
    base: &CameraIntrinsics,
    mesh: &Mesh,
) -> Result<f64, ExperimentError> {
    if mesh.is_empty() {
        return Err(ExperimentError::EmptyMesh);
    }
    let (ia, ib) = (a.intrinsics(base), b.intrinsics(base));
    let (pa, pb) = (a.pose(), b.pose());
    let mut sum = 0.0;
    for (index, v) in mesh.vertices().iter().enumerate() {
        let project = |pose: &Pose, intr: &CameraIntrinsics| {
            let p = transform_point(v, pose);
            project_point(&p, intr).map_err(|_| RenderError::VertexBehindCamera { index, depth: p.z })
        };
        let d = project(&pa, &ia)?.distance(&project(&pb, &ib)?);
        sum += d * d;
    }
    Ok((sum / mesh.vertices().len() as f64).sqrt())
}

pub fn evaluate(
    final_state: &RefinementState,
    gt: &AnnotatedScene,
    mesh: &Mesh,
) -> Result<PoseMetrics, ExperimentError> {
    let k_matches = gt.reparam_k == Some(final_state.k) && gt.pose.tz() == final_state.k;
    if !k_matches {
        return Err(ExperimentError::KMismatch {
            state_k: final_state.k,
            gt_k: gt.reparam_k,
        });
    }
    let truth = RefinementState::from_pose(&gt.pose, gt.intrinsics.f);
    Ok(PoseMetrics {
        focal_rel_error: (final_state.f - truth.f).abs() / truth.f,
        rotation_error: geodesic_distance(&final_state.rotation, &truth.rotation),
        xy_error: (final_state.x - truth.x).hypot(final_state.y - truth.y),
        reproj_rmse: reprojection_rmse(final_state, &truth, &gt.intrinsics, mesh)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub focal_rel_error: f64,
    pub rotation_error: f64,
    pub xy_error: f64,
    pub reproj_rmse: f64,
    pub iterations: usize,
    pub terminated_by: Termination,
}

impl EvalRecord {
    pub fn new(metrics: PoseMetrics, trajectory: &RefinementTrajectory) -> Self {
        Self {
            focal_rel_error: metrics.focal_rel_error,
            rotation_error: metrics.rotation_error,
            xy_error: metrics.xy_error,
            reproj_rmse: metrics.reproj_rmse,
            iterations: trajectory.iterations(),
            terminated_by: trajectory.termination,
        }
    }
}

/// Loss along the joint `(alpha f, alpha t_z)` direction and along the
/// decomposed `(alpha f, t_z fixed)` direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityCurve {
    pub alphas: Vec<f64>,
    pub loss_joint_manifold: Vec<f64>,
    pub loss_decomposed: Vec<f64>,
    /// Second difference of the decomposed curve at `alpha = 1` over that of
    /// the joint curve; `+inf` when the joint curve is flat. `None` when 1.0
    /// has no sampled neighbor on one side.
    pub curvature_ratio: Option<f64>,
}

/// Second derivative at `alphas[center]` from its nearest sampled neighbors.
fn second_difference(alphas: &[f64], values: &[f64], center: usize) -> Option<f64> {
    let a0 = alphas[center];
    let below = (0..alphas.len())
        .filter(|&i| alphas[i] < a0)
        .max_by(|&i, &j| alphas[i].total_cmp(&alphas[j]))?;
    let above = (0..alphas.len())
        .filter(|&i| alphas[i] > a0)
        .min_by(|&i, &j| alphas[i].total_cmp(&alphas[j]))?;
    let (hm, hp) = (a0 - alphas[below], alphas[above] - a0);
    let (lm, l0, lp) = (values[below], values[center], values[above]);
    Some(2.0 * ((lp - l0) / hp - (l0 - lm) / hm) / (hp + hm))
}

pub fn ambiguity_sweep(
    scene: &AnnotatedScene,
    mesh: &Mesh,
    alphas: &[f64],
) -> Result<AmbiguityCurve, ExperimentError> {
    let valid = alphas.iter().all(|a| a.is_finite() && *a > 0.0);
    let Some(center) = alphas.iter().position(|&a| a == 1.0).filter(|_| valid) else {
        return Err(ExperimentError::InvalidAlphas);
    };
    let reference = render_silhouette(mesh, &scene.pose, &scene.intrinsics)?;
    let loss = |pose: &Pose, intr: &CameraIntrinsics| -> Result<f64, ExperimentError> {
        let img = render_silhouette(mesh, pose, intr)?;
        Ok(1.0 - silhouette_iou(&img, &reference)?)
    };

    let mut joint = Vec::with_capacity(alphas.len());
    let mut decomposed = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let intr = scene.intrinsics.with_focal(alpha * scene.intrinsics.f);
        let mut scaled = scene.pose;
        scaled.translation.z *= alpha;
        joint.push(loss(&scaled, &intr)?);
        decomposed.push(loss(&scene.pose, &intr)?);
    }

    let curvature_ratio = match (
        second_difference(alphas, &decomposed, center),
        second_difference(alphas, &joint, center),
    ) {
        (Some(d), Some(j)) if j.abs() < 1e-12 => Some(if d.abs() < 1e-12 { f64::NAN } else { f64::INFINITY }),
        (Some(d), Some(j)) => Some(d / j),
        _ => None,
    };
    Ok(AmbiguityCurve {
        alphas: alphas.to_vec(),
        loss_joint_manifold: joint,
        loss_decomposed: decomposed,
        curvature_ratio,
    })
}

/// Bounds of the random offset applied to ground truth to form initial states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    /// Radians.
    pub max_rotation: f64,
    /// Maximum lateral offset as a multiple of `k`.
    pub max_xy: f64,
    /// The initial focal length lies within `[f / factor, f * factor]`.
    pub max_focal_factor: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            max_rotation: 15f64.to_radians(),
            max_xy: 0.1,
            max_focal_factor: 2.0,
        }
    }
}

/// Random initial state around `gt` within the configured bounds.
pub fn perturb<R: Rng + ?Sized>(
    gt: &RefinementState,
    cfg: &PerturbationConfig,
    rng: &mut R,
) -> RefinementState {
    let axis = uniform_direction(rng);
    let angle = rng.gen_range(0.0..=cfg.max_rotation);
    let radius = cfg.max_xy * gt.k * rng.gen::<f64>().sqrt();
    let theta = rng.gen_range(0.0..2.0 * PI);
    let log_factor = rng.gen_range(-1.0..=1.0) * cfg.max_focal_factor.ln();
    RefinementState {
        rotation: Rotation::exp(&(axis * angle)).compose(&gt.rotation),
        x: gt.x + radius * theta.cos(),
        y: gt.y + radius * theta.sin(),
        f: gt.f * log_factor.exp(),
        k: gt.k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProviderKind {
    GaussNewton,
    SilhouetteFd(FdSteps),
}

impl ProviderKind {
    pub fn build(
        &self,
        correspondences: &[Correspondence],
    ) -> Result<Box<dyn AlignmentProvider>, AlignmentError> {
        Ok(match self {
            ProviderKind::GaussNewton => Box::new(GaussNewtonProvider::new(correspondences)?),
            ProviderKind::SilhouetteFd(steps) => Box::new(SilhouetteFdProvider::new(*steps)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProviderKind::GaussNewton => "gn",
            ProviderKind::SilhouetteFd(_) => "fd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    GroundTruth,
    Perturbed,
    /// Back-projected bounding box of the ground-truth projection.
    BBox,
}

/// Pass/fail thresholds for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessThresholds {
    pub focal_rel_error: f64,
    /// Radians.
    pub rotation_error: f64,
    /// Pixels.
    pub reproj_rmse: f64,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self {
            focal_rel_error: 0.01,
            rotation_error: 0.5f64.to_radians(),
            reproj_rmse: 0.5,
        }
    }
}

impl SuccessThresholds {
    pub fn accepts(&self, r: &EvalRecord) -> bool {
        r.focal_rel_error < self.focal_rel_error
            && r.rotation_error < self.rotation_error
            && r.reproj_rmse < self.reproj_rmse
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    /// `seed` is ignored; per-trial seeds derive from [`BenchmarkConfig::seed`].
    pub sampler: SceneSamplerConfig,
    pub refinement: RefinementConfig,
    pub perturbation: PerturbationConfig,
    pub init: InitMode,
    pub provider: ProviderKind,
    pub thresholds: SuccessThresholds,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            sampler: SceneSamplerConfig::default(),
            refinement: RefinementConfig::default(),
            perturbation: PerturbationConfig::default(),
            init: InitMode::Perturbed,
            provider: ProviderKind::GaussNewton,
            thresholds: SuccessThresholds::default(),
            trials: 100,
            seed: 0,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub mesh: String,
    pub eval: EvalRecord,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub mesh: String,
    pub error: ExperimentError,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSummary {
    pub median: f64,
    pub p90: f64,
    pub mean: f64,
    pub max: f64,
}

impl MetricSummary {
    /// Nearest-rank statistics; all zero for an empty sample.
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self {
            median: rank(0.5),
            p90: rank(0.9),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkSummary {
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub focal_rel_error: MetricSummary,
    pub rotation_error: MetricSummary,
    pub xy_error: MetricSummary,
    pub reproj_rmse: MetricSummary,
    pub iterations: MetricSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summary: BenchmarkSummary,
}

/// Everything produced by a single refinement trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub synthetic: SyntheticScene,
    pub init: RefinementState,
    pub trajectory: RefinementTrajectory,
    pub eval: EvalRecord,
}

/// Starting point of a refinement of `synthetic`. Perturbations draw from
/// stream 1 of `seed`.
pub fn initial_state(
    mode: InitMode,
    perturbation: &PerturbationConfig,
    synthetic: &SyntheticScene,
    mesh: &Mesh,
    seed: u64,
) -> Result<RefinementState, ExperimentError> {
    let gt = synthetic.ground_truth();
    Ok(match mode {
        InitMode::GroundTruth => gt,
        InitMode::Perturbed => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            perturb(&gt, perturbation, &mut rng)
        }
        InitMode::BBox => {
            let bbox = projected_bbox(mesh, &synthetic.scene.pose, &synthetic.scene.intrinsics)?;
            init_state(&bbox, &synthetic.scene.intrinsics, gt.k)?
        }
    })
}

/// Samples a scene, builds the initial state and refines it.
pub fn run_trial(
    cfg: &BenchmarkConfig,
    mesh: &NamedMesh,
    seed: u64,
) -> Result<TrialRun, ExperimentError> {
    let sampler = SceneSamplerConfig { seed, ..cfg.sampler };
    let synthetic = generate_scene(&sampler, mesh)?;
    let init = initial_state(cfg.init, &cfg.perturbation, &synthetic, &mesh.mesh, seed)?;
    let provider = cfg.provider.build(&synthetic.correspondences)?;
    let ctx = AlignmentContext {
        observation: &synthetic.observation,
        mesh: &mesh.mesh,
        intrinsics: &synthetic.scene.intrinsics,
    };
    let trajectory = refine(&init, &ctx, provider.as_ref(), &cfg.refinement)?;
    let metrics = evaluate(trajectory.final_state(), &synthetic.scene, &mesh.mesh)?;
    let eval = EvalRecord::new(metrics, &trajectory);
    Ok(TrialRun {
        synthetic,
        init,
        trajectory,
        eval,
    })
}

/// Runs `cfg.trials` independent trials, cycling through `meshes`.
/// Per-trial errors are collected, not propagated.
pub fn run_benchmark(
    cfg: &BenchmarkConfig,
    meshes: &[NamedMesh],
) -> Result<BenchmarkReport, ExperimentError> {
    if cfg.trials == 0 || meshes.is_empty() {
        return Err(ExperimentError::EmptyBenchmark);
    }
    cfg.sampler.validate()?;
    cfg.refinement.validate()?;

    let one = |trial: usize| {
        let seed = cfg.seed.wrapping_add(trial as u64);
        let mesh = &meshes[trial % meshes.len()];
        (trial, seed, mesh, run_trial(cfg, mesh, seed).map(|run| run.eval))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| (0..cfg.trials).into_par_iter().map(one).collect());

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (trial, seed, mesh, outcome) in outcomes {
        match outcome {
            Ok(eval) => records.push(TrialRecord {
                trial,
                seed,
                mesh: mesh.name.clone(),
                success: cfg.thresholds.accepts(&eval),
                eval,
            }),
            Err(error) => failures.push(TrialFailure {
                trial,
                seed,
                mesh: mesh.name.clone(),
                error,
            }),
        }
    }
    let column = |f: fn(&EvalRecord) -> f64| {
        MetricSummary::from_values(&records.iter().map(|r| f(&r.eval)).collect::<Vec<_>>())
    };
    let summary = BenchmarkSummary {
        trials: cfg.trials,
        successes: records.iter().filter(|r| r.success).count(),
        failures: failures.len(),
        focal_rel_error: column(|e| e.focal_rel_error),
        rotation_error: column(|e| e.rotation_error),
        xy_error: column(|e| e.xy_error),
        reproj_rmse: column(|e| e.reproj_rmse),
        iterations: column(|e| e.iterations as f64),
    };
    Ok(BenchmarkReport {
        records,
        failures,
        summary,
    })
}
