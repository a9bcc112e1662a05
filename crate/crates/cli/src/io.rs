//! File formats: annotation JSON, Wavefront OBJ meshes, binary PGM masks and
//! the CSV outputs of the refinement, ambiguity and benchmark runs.
//!
//! Functions here convert between bytes/strings and domain values; writing
//! files atomically is left to the caller.
//!
//! Floating-point values are written in their shortest round-trip decimal
//! form, so parsing an emitted file reproduces every value bit for bit.

use focalsplit::experiments::{AmbiguityCurve, BenchmarkReport, MetricSummary};
use focalsplit::geometry::{CameraIntrinsics, Pose, Rotation, Vec3};
use focalsplit::mesh::{Mesh, MeshError};
use focalsplit::refiner::RefinementTrajectory;
use focalsplit::renderer::SilhouetteImage;
use focalsplit::reparam::AnnotatedScene;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const TRAJECTORY_HEADER: &str = "iter,qw,qx,qy,qz,x,y,f,loss,reproj_rmse,clamped";
pub const BENCHMARK_HEADER: &str =
    "trial,seed,mesh,focal_rel_err,rot_err_rad,xy_err_m,reproj_rmse_px,iters,terminated_by";
pub const BENCHMARK_SUMMARY_HEADER: &str =
    "stat,focal_rel_err,rot_err_rad,xy_err_m,reproj_rmse_px,iters";
pub const AMBIGUITY_HEADER: &str = "alpha,loss_joint,loss_decomposed";

/// Prefix for referring to procedural meshes instead of files.
pub const BUILTIN_PREFIX: &str = "builtin:";

/// Quaternions further than this from unit norm are re-normalized with a warning.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("annotation JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("line {line}: {message}")]
    ObjParse { line: usize, message: String },
    #[error("line {line}: vertex index {index} out of range ({count} vertices)")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("invalid PGM: {0}")]
    Pgm(String),
    #[error("unknown builtin mesh '{0}'")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub mesh: String,
    /// `[w, x, y, z]`
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparamEntry {
    pub k: f64,
}

/// Serialized form of an [`AnnotatedScene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub image: ImageSize,
    pub camera: CameraEntry,
    pub object: ObjectEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reparam: Option<ReparamEntry>,
}

impl From<&AnnotatedScene> for AnnotationFile {
    fn from(scene: &AnnotatedScene) -> Self {
        let t = scene.pose.translation;
        AnnotationFile {
            image: ImageSize {
                width: scene.intrinsics.width,
                height: scene.intrinsics.height,
            },
            camera: CameraEntry {
                f: scene.intrinsics.f,
                cx: scene.intrinsics.cx,
                cy: scene.intrinsics.cy,
            },
            object: ObjectEntry {
                mesh: scene.mesh_path.to_string_lossy().into_owned(),
                rotation: scene.pose.rotation.wxyz(),
                translation: [t.x, t.y, t.z],
            },
            reparam: scene.reparam_k.map(|k| ReparamEntry { k }),
        }
    }
}

impl AnnotationFile {
    pub fn to_scene(&self) -> Result<AnnotatedScene, IoError> {
        let bad = |m: &str| IoError::InvalidAnnotation(m.to_string());
        let numbers = [self.camera.f, self.camera.cx, self.camera.cy]
            .into_iter()
            .chain(self.object.rotation)
            .chain(self.object.translation)
            .chain(self.reparam.as_ref().map(|r| r.k));
        if numbers.clone().any(|v| !v.is_finite()) {
            return Err(bad("all numbers must be finite"));
        }
        let intrinsics = CameraIntrinsics {
            f: self.camera.f,
            cx: self.camera.cx,
            cy: self.camera.cy,
            width: self.image.width,
            height: self.image.height,
        };
        if !intrinsics.is_valid() {
            return Err(bad("camera.f must be positive and image dimensions at least 1"));
        }
        let q = self.object.rotation;
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            log::warn!("object.rotation has norm {norm}; re-normalizing");
        }
        let rotation = Rotation::from_wxyz(q).map_err(|_| bad("object.rotation has zero norm"))?;
        let [x, y, z] = self.object.translation;
        if z <= 0.0 {
            return Err(bad("object.translation z must be positive"));
        }
        let reparam_k = self.reparam.as_ref().map(|r| r.k);
        if let Some(k) = reparam_k {
            if k <= 0.0 {
                return Err(bad("reparam.k must be positive"));
            }
            if k != z {
                return Err(bad("re-annotated scene must have translation z equal to reparam.k"));
            }
        }
        Ok(AnnotatedScene {
            mesh_path: PathBuf::from(&self.object.mesh),
            intrinsics,
            pose: Pose::new(rotation, Vec3::new(x, y, z)),
            reparam_k,
        })
    }
}

pub fn parse_annotation(text: &str) -> Result<AnnotatedScene, IoError> {
    serde_json::from_str::<AnnotationFile>(text)?.to_scene()
}

/// Pretty-printed JSON with a trailing newline.
pub fn annotation_to_json(scene: &AnnotatedScene) -> String {
    let mut s = serde_json::to_string_pretty(&AnnotationFile::from(scene))
        .expect("annotation serialization cannot fail");
    s.push('\n');
    s
}

pub fn load_annotation(path: &Path) -> Result<AnnotatedScene, IoError> {
    parse_annotation(&read_to_string(path)?)
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses the OBJ subset used for object models: `v x y z` and `f` records.
///
/// Face corners may use the `v/vt/vn` forms; only the vertex index is used.
/// Negative indices count back from the latest vertex. Polygons are
/// fan-triangulated from their first corner. Every other record is ignored.
pub fn parse_obj(text: &str) -> Result<Mesh, IoError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut fields = content.split_whitespace();
        let err = |message: String| IoError::ObjParse { line, message };
        match fields.next() {
            Some("v") => {
                let coords: Vec<f64> = fields
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad coordinate '{s}': {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(err("vertex coordinates must be finite".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let count = vertices.len();
                let corners: Vec<usize> = fields
                    .map(|corner| {
                        let head = corner.split('/').next().unwrap_or("");
                        let index: i64 = head
                            .parse()
                            .map_err(|e| err(format!("bad vertex index '{corner}': {e}")))?;
                        let resolved = if index > 0 {
                            index - 1
                        } else {
                            count as i64 + index
                        };
                        if index == 0 || resolved < 0 || resolved >= count as i64 {
                            return Err(IoError::IndexOutOfRange { line, index, count });
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if corners.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                triangles.extend(corners.windows(2).skip(1).map(|w| [corners[0], w[0], w[1]]));
            }
            _ => {}
        }
    }
    Ok(Mesh::new(vertices, triangles)?)
}

pub fn load_obj(path: &Path) -> Result<Mesh, IoError> {
    parse_obj(&read_to_string(path)?)
}

/// Resolves a mesh reference: `builtin:<name>` or a path, relative paths
/// being taken relative to `base_dir`.
pub fn load_mesh(reference: &str, base_dir: &Path) -> Result<Mesh, IoError> {
    if let Some(name) = reference.strip_prefix(BUILTIN_PREFIX) {
        return Mesh::builtin(name).ok_or_else(|| IoError::UnknownBuiltin(name.to_string()));
    }
    let path = Path::new(reference);
    if path.is_absolute() {
        load_obj(path)
    } else {
        load_obj(&base_dir.join(path))
    }
}

/// Binary PGM: `P5\n<width> <height>\n255\n` then one byte per pixel,
/// row-major, 0 for background and 255 for silhouette.
pub fn encode_pgm(image: &SilhouetteImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.mask().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Reads a binary PGM written by [`encode_pgm`]; any non-zero byte is
/// treated as silhouette.
pub fn decode_pgm(bytes: &[u8]) -> Result<SilhouetteImage, IoError> {
    let bad = |m: &str| IoError::Pgm(m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("magic number is not P5"));
    }
    let parse = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let n = width as usize * height as usize;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != n {
        return Err(bad("raster size does not match dimensions"));
    }
    SilhouetteImage::from_mask(width, height, raster.iter().map(|&b| b != 0).collect())
        .ok_or_else(|| bad("raster size does not match dimensions"))
}

/// One row per accepted iteration. `reproj_rmse[i]` belongs to entry `i`.
pub fn trajectory_csv(trajectory: &RefinementTrajectory, reproj_rmse: &[f64]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for (e, rmse) in trajectory.entries.iter().zip(reproj_rmse) {
        let [qw, qx, qy, qz] = e.state.rotation.wxyz();
        let s = &e.state;
        let _ = writeln!(
            out,
            "{},{qw},{qx},{qy},{qz},{},{},{},{},{rmse},{}",
            e.iteration,
            s.x,
            s.y,
            s.f,
            e.loss,
            u8::from(e.clamped)
        );
    }
    out
}

pub fn ambiguity_csv(curve: &AmbiguityCurve) -> String {
    let mut out = String::from(AMBIGUITY_HEADER);
    out.push('\n');
    for ((a, j), d) in curve
        .alphas
        .iter()
        .zip(&curve.loss_joint_manifold)
        .zip(&curve.loss_decomposed)
    {
        let _ = writeln!(out, "{a},{j},{d}");
    }
    out
}

/// Per-trial rows for successful trials, in trial order.
pub fn benchmark_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from(BENCHMARK_HEADER);
    out.push('\n');
    for r in &report.records {
        let e = &r.eval;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.mesh,
            e.focal_rel_error,
            e.rotation_error,
            e.xy_error,
            e.reproj_rmse,
            e.iterations,
            e.terminated_by
        );
    }
    out
}

/// Aggregate statistics per metric plus success and failure counts.
pub fn benchmark_summary_csv(report: &BenchmarkReport) -> String {
    let s = &report.summary;
    let mut out = String::from(BENCHMARK_SUMMARY_HEADER);
    out.push('\n');
    type Stat = fn(&MetricSummary) -> f64;
    let stats: [(&str, Stat); 4] = [
        ("median", |m| m.median),
        ("p90", |m| m.p90),
        ("mean", |m| m.mean),
        ("max", |m| m.max),
    ];
    for (name, get) in stats {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{}",
            get(&s.focal_rel_error),
            get(&s.rotation_error),
            get(&s.xy_error),
            get(&s.reproj_rmse),
            get(&s.iterations)
        );
    }
    let _ = writeln!(out, "trials,{0},{0},{0},{0},{0}", s.trials);
    let _ = writeln!(out, "successes,{0},{0},{0},{0},{0}", s.successes);
    let _ = writeln!(out, "failures,{0},{0},{0},{0},{0}", s.failures);
    out
}
