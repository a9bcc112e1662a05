//! Argument parsing and subcommand drivers.
//!
//! Every subcommand computes all of its outputs before writing any file, and
//! each file is written to a temporary sibling and renamed into place.

use crate::io::{
    ambiguity_csv, annotation_to_json, benchmark_csv, benchmark_summary_csv, encode_pgm,
    load_annotation, load_mesh, trajectory_csv, IoError, BUILTIN_PREFIX,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use focalsplit::alignment::{AlignmentContext, FdSteps};
use focalsplit::experiments::{
    ambiguity_sweep, evaluate, generate_scene, initial_state, reprojection_rmse, run_benchmark,
    BenchmarkConfig, EvalRecord, InitMode, NamedMesh, PerturbationConfig, ProviderKind,
    SceneSamplerConfig, SyntheticScene,
};
use focalsplit::geometry::Rotation;
use focalsplit::mesh::Mesh;
use focalsplit::refiner::{refine, RefinementConfig};
use focalsplit::renderer::render_silhouette;
use focalsplit::reparam::{reannotate, reannotation_residual, restore_metric, AnnotatedScene, ReparamError, DEFAULT_K};
use std::error::Error as StdError;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable capping the number of benchmark worker threads.
pub const THREADS_ENV: &str = "FOCALSPLIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "focalsplit", version, about = "Pose and focal-length refinement with the object depth pinned to a constant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pin the object depth to k and rescale the focal length.
    Reannotate(ReannotateArgs),
    /// Lift a re-annotated scene back to a metric depth.
    RestoreMetric(RestoreArgs),
    /// Refine pose and focal length against a rendered observation.
    Fit(FitArgs),
    /// Sweep joint and focal-only scalings and record silhouette losses.
    Ambiguity(AmbiguityArgs),
    /// Run seeded refinement trials and summarize their accuracy.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ReannotateArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct RestoreArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Metric object depth, e.g. from ray casting against scene geometry.
    #[arg(long)]
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    /// Gauss-Newton on vertex reprojections.
    Gn,
    /// Finite differences of silhouette overlap.
    Fd,
}

impl ProviderArg {
    fn kind(self) -> ProviderKind {
        match self {
            ProviderArg::Gn => ProviderKind::GaussNewton,
            ProviderArg::Fd => ProviderKind::SilhouetteFd(FdSteps::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Gt,
    Perturbed,
    Bbox,
}

impl From<InitArg> for InitMode {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Gt => InitMode::GroundTruth,
            InitArg::Perturbed => InitMode::Perturbed,
            InitArg::Bbox => InitMode::BBox,
        }
    }
}

/// Image size of synthetic scenes.
#[derive(Debug, Clone, Copy, Args)]
pub struct ImageArgs {
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Annotation JSON; its ground truth is rendered as the observation.
    #[arg(required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub annotation: Option<PathBuf>,
    /// Sample a scene from --seed instead of reading an annotation.
    #[arg(long)]
    pub synthetic: bool,
    /// Mesh of the synthetic scene: `builtin:<name>` or an OBJ path.
    #[arg(long, default_value = "builtin:cube", conflicts_with = "annotation")]
    pub mesh: String,
    #[arg(long, value_enum, default_value_t = ProviderArg::Gn)]
    pub provider: ProviderArg,
    /// Reference depth; defaults to 1, or to the depth of an already re-annotated input.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Perturbed)]
    pub init: InitArg,
    #[arg(long, default_value_t = RefinementConfig::default().max_iterations)]
    pub max_iterations: usize,
    #[command(flatten)]
    pub image: ImageArgs,
    /// Outputs are `<prefix>_trajectory.csv`, `_final.json`, `_predicted.pgm` and `_observed.pgm`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct AmbiguityArgs {
    pub output: PathBuf,
    /// Annotation JSON to sweep around; otherwise a scene is sampled from --seed.
    #[arg(long)]
    pub annotation: Option<PathBuf>,
    #[arg(long, default_value = "builtin:quad", conflicts_with = "annotation")]
    pub mesh: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub k: Option<f64>,
    /// Replace the sampled rotation with the identity (camera-facing quad).
    #[arg(long, conflicts_with = "annotation")]
    pub fronto_parallel: bool,
    /// Scale factors; must include 1.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.8, 0.9, 1.0, 1.1, 1.25, 2.0])]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub image: ImageArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Per-trial CSV. Summary statistics go to the same path with a
    /// `.summary.csv` extension unless --summary is given.
    pub output: PathBuf,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Comma-separated builtin names or OBJ paths, used round-robin.
    #[arg(long, value_delimiter = ',', default_value = "cube,icosphere")]
    pub mesh_set: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = ProviderArg::Gn)]
    pub provider: ProviderArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Perturbed)]
    pub init: InitArg,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
    #[arg(long, default_value_t = RefinementConfig::default().max_iterations)]
    pub max_iterations: usize,
    #[command(flatten)]
    pub image: ImageArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: IoError,
    },
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Numerical(Box<dyn StdError + Send + Sync>),
    #[error("{failed} of {trials} trials failed")]
    TooManyFailures { failed: usize, trials: usize },
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse { .. } | CliError::InvalidInput(_) => 3,
            CliError::Numerical(_) | CliError::TooManyFailures { .. } => 4,
            CliError::Output { .. } => 1,
        }
    }
}

fn numerical<E: StdError + Send + Sync + 'static>(e: E) -> CliError {
    CliError::Numerical(Box::new(e))
}

fn reparam_error(e: ReparamError) -> CliError {
    match e {
        ReparamError::AlreadyReannotated(_) | ReparamError::NotReannotated => {
            CliError::InvalidInput(e.to_string())
        }
        other => numerical(other),
    }
}

fn parse_error(path: &Path) -> impl FnOnce(IoError) -> CliError + '_ {
    move |source| CliError::Parse {
        context: path.display().to_string(),
        source,
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be a positive number, got {v}")))
    }
}

fn annotation_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn mesh_of(scene: &AnnotatedScene, annotation: &Path) -> Result<Mesh, CliError> {
    let reference = scene.mesh_path.to_string_lossy();
    load_mesh(&reference, annotation_dir(annotation)).map_err(|source| CliError::Parse {
        context: format!("{}: mesh '{reference}'", annotation.display()),
        source,
    })
}

/// `builtin:<name>`, a bare builtin name, or an OBJ path relative to the
/// working directory.
fn named_mesh(reference: &str) -> Result<NamedMesh, CliError> {
    let bare = reference.strip_prefix(BUILTIN_PREFIX).unwrap_or(reference);
    if let Some(m) = NamedMesh::builtin(bare) {
        return Ok(m);
    }
    load_mesh(reference, Path::new("."))
        .map(|mesh| NamedMesh::new(reference, mesh))
        .map_err(|source| CliError::Parse {
            context: format!("mesh '{reference}'"),
            source,
        })
}

/// Brings a scene into k-space. Already re-annotated scenes keep their own
/// depth, which must agree with an explicit `k`.
fn to_k_space(scene: &AnnotatedScene, k: Option<f64>) -> Result<AnnotatedScene, CliError> {
    match (scene.reparam_k, k) {
        (None, k) => reannotate(scene, positive("k", k.unwrap_or(DEFAULT_K))?).map_err(reparam_error),
        (Some(have), Some(want)) if have != want => Err(CliError::Usage(format!(
            "--k {want} conflicts with the annotation's re-annotation depth {have}"
        ))),
        (Some(_), _) => Ok(scene.clone()),
    }
}

fn sampler(image: ImageArgs, k: f64, seed: u64) -> Result<SceneSamplerConfig, CliError> {
    let cfg = SceneSamplerConfig {
        width: image.width,
        height: image.height,
        k,
        seed,
        ..Default::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    // Temporary files are created owner-only; outputs should not be.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(err)?;
    }
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

fn write_all(outputs: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    outputs.iter().try_for_each(|(p, b)| write_atomic(p, b))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Reannotate(a) => cmd_reannotate(a),
        Command::RestoreMetric(a) => cmd_restore(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Ambiguity(a) => cmd_ambiguity(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn cmd_reannotate(a: &ReannotateArgs) -> Result<(), CliError> {
    let k = positive("k", a.k)?;
    let scene = load_annotation(&a.input).map_err(parse_error(&a.input))?;
    let mesh = mesh_of(&scene, &a.input)?;
    let out = reannotate(&scene, k).map_err(reparam_error)?;
    let report = reannotation_residual(&scene, &out, &mesh).map_err(reparam_error)?;
    write_atomic(&a.output, annotation_to_json(&out).as_bytes())?;
    println!("max_center_error_px {}", report.max_center_error);
    println!("max_vertex_error_px {}", report.max_vertex_error);
    println!("depth_extent_ratio {}", report.depth_extent_ratio);
    Ok(())
}

fn cmd_restore(a: &RestoreArgs) -> Result<(), CliError> {
    let depth = positive("depth", a.depth)?;
    let scene = load_annotation(&a.input).map_err(parse_error(&a.input))?;
    let out = restore_metric(&scene, depth).map_err(reparam_error)?;
    write_atomic(&a.output, annotation_to_json(&out).as_bytes())
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    if a.max_iterations == 0 {
        return Err(CliError::Usage("--max-iterations must be at least 1".into()));
    }
    let (mesh_ref, mesh, synthetic) = match &a.annotation {
        Some(path) => {
            let scene = load_annotation(path).map_err(parse_error(path))?;
            let mesh = mesh_of(&scene, path)?;
            let k_scene = to_k_space(&scene, a.k)?;
            let synthetic = SyntheticScene::observe(scene.clone(), k_scene, &mesh).map_err(numerical)?;
            (scene.mesh_path.to_string_lossy().into_owned(), mesh, synthetic)
        }
        None => {
            let k = positive("k", a.k.unwrap_or(DEFAULT_K))?;
            let named = named_mesh(&a.mesh)?;
            let synthetic = generate_scene(&sampler(a.image, k, a.seed)?, &named).map_err(numerical)?;
            (named.name, named.mesh, synthetic)
        }
    };

    let base = synthetic.scene.intrinsics;
    let gt = synthetic.ground_truth();
    let init = initial_state(a.init.into(), &PerturbationConfig::default(), &synthetic, &mesh, a.seed)
        .map_err(numerical)?;
    let provider = a.provider.kind().build(&synthetic.correspondences).map_err(numerical)?;
    let ctx = AlignmentContext {
        observation: &synthetic.observation,
        mesh: &mesh,
        intrinsics: &base,
    };
    let cfg = RefinementConfig {
        max_iterations: a.max_iterations,
        ..Default::default()
    };
    let trajectory = refine(&init, &ctx, provider.as_ref(), &cfg).map_err(numerical)?;
    let final_state = *trajectory.final_state();
    let eval = EvalRecord::new(
        evaluate(&final_state, &synthetic.scene, &mesh).map_err(numerical)?,
        &trajectory,
    );
    let rmse = trajectory
        .entries
        .iter()
        .map(|e| reprojection_rmse(&e.state, &gt, &base, &mesh))
        .collect::<Result<Vec<_>, _>>()
        .map_err(numerical)?;
    let final_intr = final_state.intrinsics(&base);
    let predicted = render_silhouette(&mesh, &final_state.pose(), &final_intr).map_err(numerical)?;
    let final_scene = AnnotatedScene {
        mesh_path: mesh_ref.into(),
        intrinsics: final_intr,
        pose: final_state.pose(),
        reparam_k: Some(final_state.k),
    };

    write_all(&[
        (with_suffix(&a.out_prefix, "_trajectory.csv"), trajectory_csv(&trajectory, &rmse).into_bytes()),
        (with_suffix(&a.out_prefix, "_final.json"), annotation_to_json(&final_scene).into_bytes()),
        (with_suffix(&a.out_prefix, "_predicted.pgm"), encode_pgm(&predicted)),
        (with_suffix(&a.out_prefix, "_observed.pgm"), encode_pgm(&synthetic.observation)),
    ])?;
    println!("terminated_by {}", eval.terminated_by);
    println!("iterations {}", eval.iterations);
    println!("focal_rel_err {}", eval.focal_rel_error);
    println!("rot_err_rad {}", eval.rotation_error);
    println!("xy_err_m {}", eval.xy_error);
    println!("reproj_rmse_px {}", eval.reproj_rmse);
    Ok(())
}

fn cmd_ambiguity(a: &AmbiguityArgs) -> Result<(), CliError> {
    if !a.alphas.iter().all(|x| x.is_finite() && *x > 0.0) || !a.alphas.contains(&1.0) {
        return Err(CliError::Usage("--alphas must be positive and include 1".into()));
    }
    let (scene, mesh) = match &a.annotation {
        Some(path) => {
            let scene = load_annotation(path).map_err(parse_error(path))?;
            let mesh = mesh_of(&scene, path)?;
            (to_k_space(&scene, a.k)?, mesh)
        }
        None => {
            let k = positive("k", a.k.unwrap_or(DEFAULT_K))?;
            let named = named_mesh(&a.mesh)?;
            let mut scene = generate_scene(&sampler(a.image, k, a.seed)?, &named)
                .map_err(numerical)?
                .scene;
            if a.fronto_parallel {
                scene.pose.rotation = Rotation::IDENTITY;
            }
            (scene, named.mesh)
        }
    };
    let curve = ambiguity_sweep(&scene, &mesh, &a.alphas).map_err(numerical)?;
    write_atomic(&a.output, ambiguity_csv(&curve).as_bytes())?;
    match curve.curvature_ratio {
        Some(r) => println!("curvature_ratio {r}"),
        None => println!("curvature_ratio undefined"),
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if a.max_iterations == 0 {
        return Err(CliError::Usage("--max-iterations must be at least 1".into()));
    }
    let k = positive("k", a.k)?;
    let threads = threads_from_env()?;
    let meshes = a
        .mesh_set
        .iter()
        .map(|r| named_mesh(r.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if meshes.is_empty() {
        return Err(CliError::Usage("--mesh-set must name at least one mesh".into()));
    }
    let cfg = BenchmarkConfig {
        sampler: sampler(a.image, k, a.seed)?,
        refinement: RefinementConfig {
            max_iterations: a.max_iterations,
            ..Default::default()
        },
        init: a.init.into(),
        provider: a.provider.kind(),
        trials: a.trials,
        seed: a.seed,
        threads,
        ..Default::default()
    };
    let report = run_benchmark(&cfg, &meshes).map_err(numerical)?;
    let summary_path = a
        .summary
        .clone()
        .unwrap_or_else(|| a.output.with_extension("summary.csv"));
    write_all(&[
        (a.output.clone(), benchmark_csv(&report).into_bytes()),
        (summary_path, benchmark_summary_csv(&report).into_bytes()),
    ])?;

    for f in &report.failures {
        eprintln!("trial {} (seed {}, {}): {}", f.trial, f.seed, f.mesh, f.error);
    }
    let s = &report.summary;
    println!("trials {}  successes {}  failures {}", s.trials, s.successes, s.failures);
    println!("{:<16}{:>14}{:>14}{:>14}{:>14}", "metric", "median", "p90", "mean", "max");
    for (name, m) in [
        ("focal_rel_err", &s.focal_rel_error),
        ("rot_err_rad", &s.rotation_error),
        ("xy_err_m", &s.xy_error),
        ("reproj_rmse_px", &s.reproj_rmse),
        ("iters", &s.iterations),
    ] {
        println!("{name:<16}{:>14.6e}{:>14.6e}{:>14.6e}{:>14.6e}", m.median, m.p90, m.mean, m.max);
    }
    if s.failures * 20 > s.trials {
        return Err(CliError::TooManyFailures {
            failed: s.failures,
            trials: s.trials,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn suffix_appends_to_file_name() {
        assert_eq!(with_suffix(Path::new("out/run"), "_final.json"), PathBuf::from("out/run_final.json"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 2);
        assert_eq!(CliError::InvalidInput(String::new()).exit_code(), 3);
        assert_eq!(CliError::TooManyFailures { failed: 6, trials: 100 }.exit_code(), 4);
    }
}
