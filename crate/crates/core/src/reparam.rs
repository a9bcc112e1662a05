//! Depth pinning and focal rescaling of annotated scenes.
//!
//! Re-annotation moves an object to the constant depth `k` and rescales the
//! focal length by `k / t_z` so that the object center keeps its image
//! position:
//!
//! ```text
//! t_z' = k
//! f'   = f * k / t_z
//! ```
//!
//! `x` and `y` are left untouched. The center projects to
//! `f' * x / k = f * x / t_z`, so any change to `x` or `y` would move it.
//!
//! Points at depths other than `t_z` do not project identically after
//! re-annotation; [`reannotation_residual`] measures that gap for a mesh.

use crate::geometry::{project_point, transform_point, CameraIntrinsics, Pose, Vec3};
use crate::mesh::Mesh;
use std::path::PathBuf;
use thiserror::Error;

/// Depth used for re-annotation when none is given.
pub const DEFAULT_K: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReparamError {
    #[error("object depth {0} must be positive")]
    NonPositiveDepth(f64),
    #[error("reference depth k = {0} must be positive")]
    NonPositiveK(f64),
    #[error("scene is already re-annotated with k = {0}")]
    AlreadyReannotated(f64),
    #[error("scene has not been re-annotated")]
    NotReannotated,
    #[error("mesh has no vertices")]
    MeshEmpty,
    #[error("vertex {0} does not project in front of the camera")]
    Projection(usize),
}

/// Mesh reference, intrinsics and ground-truth pose of one object instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedScene {
    pub mesh_path: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    /// Set once the scene has been re-annotated; equals `pose.translation.z`.
    pub reparam_k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReannotationReport {
    pub max_center_error: f64,
    pub max_vertex_error: f64,
    /// Camera-frame depth span of the mesh divided by the original depth.
    pub depth_extent_ratio: f64,
}

fn check_positive(v: f64, err: fn(f64) -> ReparamError) -> Result<(), ReparamError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(err(v))
    }
}

/// Pins the object depth to `k` and rescales the focal length to compensate.
pub fn reannotate(scene: &AnnotatedScene, k: f64) -> Result<AnnotatedScene, ReparamError> {
    if let Some(prev) = scene.reparam_k {
        return Err(ReparamError::AlreadyReannotated(prev));
    }
    let tz_old = scene.pose.tz();
    check_positive(tz_old, ReparamError::NonPositiveDepth)?;
    check_positive(k, ReparamError::NonPositiveK)?;

    let mut out = scene.clone();
    out.pose.translation.z = k;
    out.intrinsics.f = scene.intrinsics.f * (k / tz_old);
    out.reparam_k = Some(k);
    Ok(out)
}

/// Lifts a re-annotated scene back to metric depth `depth`, e.g. a depth
/// obtained by ray casting against reconstructed scene geometry.
pub fn restore_metric(scene: &AnnotatedScene, depth: f64) -> Result<AnnotatedScene, ReparamError> {
    let k = scene.reparam_k.ok_or(ReparamError::NotReannotated)?;
    check_positive(depth, ReparamError::NonPositiveDepth)?;
    let mut out = scene.clone();
    out.pose.translation.z = depth;
    out.intrinsics.f = scene.intrinsics.f * (depth / k);
    out.reparam_k = None;
    Ok(out)
}

/// Per-vertex reprojection differences between a scene and its re-annotation.
pub fn reannotation_residual(
    original: &AnnotatedScene,
    reannotated: &AnnotatedScene,
    mesh: &Mesh,
) -> Result<ReannotationReport, ReparamError> {
    if mesh.is_empty() {
        return Err(ReparamError::MeshEmpty);
    }
    let tz_old = original.pose.tz();
    check_positive(tz_old, ReparamError::NonPositiveDepth)?;

    let project = |p: &Vec3, pose: &Pose, intr: &CameraIntrinsics, i: usize| {
        project_point(&transform_point(p, pose), intr).map_err(|_| ReparamError::Projection(i))
    };

    let center_a = project(&Vec3::zeros(), &original.pose, &original.intrinsics, 0)?;
    let center_b = project(&Vec3::zeros(), &reannotated.pose, &reannotated.intrinsics, 0)?;

    let mut max_vertex_error: f64 = 0.0;
    let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, v) in mesh.vertices().iter().enumerate() {
        let a = project(v, &original.pose, &original.intrinsics, i)?;
        let b = project(v, &reannotated.pose, &reannotated.intrinsics, i)?;
        max_vertex_error = max_vertex_error.max(a.distance(&b));
        let z = transform_point(v, &original.pose).z;
        zmin = zmin.min(z);
        zmax = zmax.max(z);
    }
    Ok(ReannotationReport {
        max_center_error: center_a.distance(&center_b),
        max_vertex_error,
        depth_extent_ratio: (zmax - zmin) / tz_old,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use proptest::prelude::*;

    fn scene(tz: f64, f: f64) -> AnnotatedScene {
        AnnotatedScene {
            mesh_path: "builtin:cube".into(),
            intrinsics: CameraIntrinsics::centered(f, 640, 480),
            pose: Pose::new(
                Rotation::from_axis_angle(&Vec3::new(0.2, 1.0, -0.4), 0.6).unwrap(),
                Vec3::new(0.15, -0.08, tz),
            ),
            reparam_k: None,
        }
    }

    fn center(s: &AnnotatedScene) -> crate::geometry::PixelPoint {
        project_point(&s.pose.translation, &s.intrinsics).unwrap()
    }

    #[test]
    fn identity_when_depth_already_k() {
        let s = scene(1.5, 600.0);
        let r = reannotate(&s, 1.5).unwrap();
        assert_eq!(r.intrinsics.f, 600.0);
        assert_eq!(r.pose, s.pose);
        assert_eq!(r.reparam_k, Some(1.5));
    }

    #[test]
    fn halves_focal_when_depth_halves() {
        let s = scene(2.0, 600.0);
        let r = reannotate(&s, 1.0).unwrap();
        assert_eq!(r.pose.tz(), 1.0);
        assert_eq!(r.intrinsics.f, 300.0);
        assert!(center(&s).distance(&center(&r)) <= 1e-9);
        assert_eq!(r.pose.rotation, s.pose.rotation);
        assert_eq!((r.pose.translation.x, r.pose.translation.y), (0.15, -0.08));
    }

    #[test]
    fn reannotate_errors() {
        assert_eq!(reannotate(&scene(-1.0, 600.0), 1.0), Err(ReparamError::NonPositiveDepth(-1.0)));
        assert_eq!(reannotate(&scene(2.0, 600.0), 0.0), Err(ReparamError::NonPositiveK(0.0)));
        let r = reannotate(&scene(2.0, 600.0), 1.0).unwrap();
        assert_eq!(reannotate(&r, 1.0), Err(ReparamError::AlreadyReannotated(1.0)));
    }

    #[test]
    fn restore_examples() {
        let mut k_space = scene(1.0, 300.0);
        k_space.reparam_k = Some(1.0);
        let m = restore_metric(&k_space, 2.0).unwrap();
        assert_eq!((m.pose.tz(), m.intrinsics.f), (2.0, 600.0));
        assert_eq!(m.reparam_k, None);
        assert_eq!(restore_metric(&k_space, 0.0), Err(ReparamError::NonPositiveDepth(0.0)));
        assert_eq!(restore_metric(&scene(2.0, 600.0), 2.0), Err(ReparamError::NotReannotated));
    }

    #[test]
    fn planar_mesh_has_no_residual() {
        let mut s = scene(2.0, 600.0);
        s.pose.rotation = Rotation::from_axis_angle(&Vec3::z(), 0.3).unwrap();
        let r = reannotate(&s, 1.0).unwrap();
        let rep = reannotation_residual(&s, &r, &Mesh::quad(0.3, 0.2)).unwrap();
        assert!(rep.max_vertex_error <= 1e-9);
        assert!(rep.max_center_error <= 1e-9);
        assert!(rep.depth_extent_ratio.abs() < 1e-12);
    }

    #[test]
    fn cube_residual_matches_per_vertex_oracle() {
        let mut s = scene(2.0, 600.0);
        s.pose.rotation = Rotation::IDENTITY;
        s.pose.translation = Vec3::new(0.1, 0.05, 2.0);
        let r = reannotate(&s, 1.0).unwrap();
        let rep = reannotation_residual(&s, &r, &Mesh::cube(0.2)).unwrap();
        // Brute force: corner (0.1, 0.1, +-0.1) offsets around (0.1, 0.05, 2).
        // Worst case is the far-right-bottom corner compared at both depths.
        let mut worst: f64 = 0.0;
        for sx in [-0.1, 0.1] {
            for sy in [-0.1, 0.1] {
                for sz in [-0.1, 0.1] {
                    let (x, y) = (0.1 + sx, 0.05 + sy);
                    let (u0, v0): (f64, f64) = (600.0 * x / (2.0 + sz), 600.0 * y / (2.0 + sz));
                    let (u1, v1) = (300.0 * x / (1.0 + sz), 300.0 * y / (1.0 + sz));
                    worst = worst.max((u0 - u1).hypot(v0 - v1));
                }
            }
        }
        assert!(rep.max_vertex_error > 0.0);
        assert!((rep.max_vertex_error - worst).abs() < 1e-9, "{} vs {worst}", rep.max_vertex_error);
        assert!((rep.depth_extent_ratio - 0.1).abs() < 1e-12);
        assert_eq!(
            reannotation_residual(&s, &r, &Mesh::default()),
            Err(ReparamError::MeshEmpty)
        );
    }

    #[test]
    fn residual_grows_with_object_scale() {
        let s = scene(2.0, 600.0);
        let r = reannotate(&s, 1.0).unwrap();
        let errs: Vec<f64> = [0.01, 0.05, 0.1, 0.2, 0.4, 0.8]
            .iter()
            .map(|&edge| reannotation_residual(&s, &r, &Mesh::cube(edge)).unwrap())
            .map(|rep| rep.max_vertex_error)
            .collect();
        assert!(errs.windows(2).all(|w| w[0] <= w[1]), "{errs:?}");
    }

    proptest! {
        #[test]
        fn round_trip_and_focal_identity(
            tz in 0.1f64..20.0, f in 10.0f64..5000.0, k in 0.05f64..10.0,
            x in -1.0f64..1.0, y in -1.0f64..1.0
        ) {
            let mut s = scene(tz, f);
            s.pose.translation.x = x;
            s.pose.translation.y = y;
            let r = reannotate(&s, k).unwrap();
            prop_assert!(((r.intrinsics.f * tz) - (f * k)).abs() <= 1e-12 * (f * k));
            prop_assert_eq!(r.pose.rotation, s.pose.rotation);
            prop_assert_eq!(r.pose.translation.x, x);
            prop_assert_eq!(r.pose.translation.y, y);
            prop_assert!(center(&s).distance(&center(&r)) <= 1e-9);
            let back = restore_metric(&r, tz).unwrap();
            prop_assert!((back.intrinsics.f - f).abs() <= 1e-9 * f);
            prop_assert!((back.pose.tz() - tz).abs() <= 1e-9 * tz);
            prop_assert_eq!(back.reparam_k, None);
        }
    }
}
