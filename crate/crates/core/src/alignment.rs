//! Alignment providers: given the current state and the observation, propose
//! the next [`UpdateVector`].
//!
//! Two analytic providers are available:
//!
//! * [`GaussNewtonProvider`] minimizes the squared reprojection error of known
//!   model-to-pixel correspondences with one damped Gauss-Newton step.
//! * [`SilhouetteFdProvider`] probes `1 - IoU` between the rendered and the
//!   observed silhouette with central differences and takes a diagonal Newton
//!   step.
//!
//! Both express their output in the update parameterization of
//! [`apply_update`](crate::refiner::apply_update), so the update rule is always
//! on the critical path. A learned provider would plug in through the same
//! [`AlignmentProvider`] trait.

use crate::geometry::{project_point, transform_point, CameraIntrinsics, PixelPoint, Pose, Rotation, Vec3};
use crate::mesh::Mesh;
use crate::refiner::{apply_update, FocalBounds, RefinementState, UpdateVector};
use crate::renderer::{render_silhouette, silhouette_iou, RenderError, SilhouetteImage};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignmentError {
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("normal equations are rank deficient")]
    DegenerateNormalEquations,
    #[error("loss is flat across every probe; silhouettes may not overlap")]
    FlatLossRegion,
    #[error("finite-difference step sizes must be positive and finite")]
    InvalidStepSize,
    #[error("correspondence {0} does not project in front of the camera")]
    Projection(usize),
    #[error("non-finite value in correspondence {0}")]
    NonFiniteCorrespondence(usize),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Everything a provider may look at besides the state.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentContext<'a> {
    pub observation: &'a SilhouetteImage,
    pub mesh: &'a Mesh,
    /// Principal point and image size; the focal length comes from the state.
    pub intrinsics: &'a CameraIntrinsics,
}

pub trait AlignmentProvider: Send + Sync {
    fn propose_update(
        &self,
        state: &RefinementState,
        ctx: &AlignmentContext<'_>,
    ) -> Result<UpdateVector, AlignmentError>;

    /// Proposal after `attempt` rejected steps (`attempt >= 1`). Halves the
    /// original proposal per attempt unless the provider knows better.
    fn damped_update(
        &self,
        _state: &RefinementState,
        _ctx: &AlignmentContext<'_>,
        proposal: &UpdateVector,
        attempt: u32,
    ) -> Result<UpdateVector, AlignmentError> {
        Ok(proposal.scaled(0.5f64.powi(attempt as i32)))
    }

    /// The quantity the refiner must not increase when accepting a step.
    fn discrepancy(
        &self,
        state: &RefinementState,
        ctx: &AlignmentContext<'_>,
    ) -> Result<f64, AlignmentError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub model_point: Vec3,
    pub observed_pixel: PixelPoint,
}

/// Differentiable parameters of the reprojection model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    /// Left-multiplied rotation increment about a camera axis.
    RotX,
    RotY,
    RotZ,
    /// Lateral translation, meters.
    X,
    Y,
    /// Depth, meters.
    Tz,
    /// Pixel-scaled lateral translation (`dx = v_x * k / f`).
    Vx,
    Vy,
    /// Focal length, pixels.
    F,
    /// Log focal length.
    LogF,
}

/// Parameters solved by [`GaussNewtonProvider`].
pub const GN_PARAMS: [Param; 6] = [Param::RotX, Param::RotY, Param::RotZ, Param::X, Param::Y, Param::LogF];

/// The update-rule parameters `(rot_update, v_x, v_y, v_f)` with depth pinned.
pub const PINNED_PARAMS: [Param; 6] = [Param::RotX, Param::RotY, Param::RotZ, Param::Vx, Param::Vy, Param::LogF];

/// Same as [`PINNED_PARAMS`] with the depth also free.
pub const FREE_DEPTH_PARAMS: [Param; 7] = [
    Param::RotX,
    Param::RotY,
    Param::RotZ,
    Param::Vx,
    Param::Vy,
    Param::Tz,
    Param::LogF,
];

/// Stacked reprojections `[u0, v0, u1, v1, ...]` of `points` under `pose`.
pub fn project_stack(
    points: &[Vec3],
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Result<DVector<f64>, AlignmentError> {
    let mut out = DVector::zeros(2 * points.len());
    for (i, p) in points.iter().enumerate() {
        let px = project_point(&transform_point(p, pose), intr).map_err(|_| AlignmentError::Projection(i))?;
        out[2 * i] = px.u;
        out[2 * i + 1] = px.v;
    }
    Ok(out)
}

/// Analytic Jacobian of [`project_stack`] with respect to `params`, at the
/// given pose and focal length. Rows alternate `u`, `v` per point.
pub fn reprojection_jacobian(
    points: &[Vec3],
    pose: &Pose,
    intr: &CameraIntrinsics,
    params: &[Param],
) -> Result<DMatrix<f64>, AlignmentError> {
    let f = intr.f;
    let k = pose.translation.z;
    let mut jac = DMatrix::zeros(2 * points.len(), params.len());
    for (i, p) in points.iter().enumerate() {
        let q = pose.rotation.rotate(p);
        let cam = q + pose.translation;
        if cam.z.is_nan() || cam.z <= crate::geometry::DEPTH_EPSILON {
            return Err(AlignmentError::Projection(i));
        }
        let iz = 1.0 / cam.z;
        // d(u, v) / d(X, Y, Z)
        let du = Vec3::new(f * iz, 0.0, -f * cam.x * iz * iz);
        let dv = Vec3::new(0.0, f * iz, -f * cam.y * iz * iz);
        for (j, param) in params.iter().enumerate() {
            let (ju, jv) = match param {
                Param::RotX | Param::RotY | Param::RotZ => {
                    let axis = match param {
                        Param::RotX => Vec3::x(),
                        Param::RotY => Vec3::y(),
                        _ => Vec3::z(),
                    };
                    let d = axis.cross(&q);
                    (du.dot(&d), dv.dot(&d))
                }
                Param::X => (du.x, dv.x),
                Param::Y => (du.y, dv.y),
                Param::Tz => (du.z, dv.z),
                Param::Vx => (du.x * k / f, dv.x * k / f),
                Param::Vy => (du.y * k / f, dv.y * k / f),
                Param::F => (cam.x * iz, cam.y * iz),
                Param::LogF => (f * cam.x * iz, f * cam.y * iz),
            };
            jac[(2 * i, j)] = ju;
            jac[(2 * i + 1, j)] = jv;
        }
    }
    Ok(jac)
}

/// Spectral summary of a Gauss-Newton normal matrix `J^T J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observability {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `lambda_max / lambda_min`; infinite when `lambda_min <= 0`.
    pub condition_number: f64,
    /// Curvature left in the focal direction after every other parameter has
    /// been optimized out (`1 / (H^-1)_ff`), relative to `lambda_max`. Zero
    /// when the focal length cannot be separated from the other parameters.
    pub focal_ratio: f64,
}

pub fn normal_matrix(
    points: &[Vec3],
    pose: &Pose,
    intr: &CameraIntrinsics,
    params: &[Param],
) -> Result<DMatrix<f64>, AlignmentError> {
    let j = reprojection_jacobian(points, pose, intr, params)?;
    Ok(j.transpose() * j)
}

/// Observability of the focal length for the given parameter set. Returns
/// `None` if `params` has no focal parameter.
pub fn observability(
    points: &[Vec3],
    pose: &Pose,
    intr: &CameraIntrinsics,
    params: &[Param],
) -> Result<Option<Observability>, AlignmentError> {
    let Some(fi) = params.iter().position(|p| matches!(p, Param::F | Param::LogF)) else {
        return Ok(None);
    };
    let h = normal_matrix(points, pose, intr, params)?;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let lmin = eigenvalues[0];
    let lmax = *eigenvalues.last().unwrap();
    let condition_number = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let focal_ratio = match h.clone().cholesky() {
        Some(ch) => {
            let mut e = DVector::zeros(params.len());
            e[fi] = 1.0;
            let col = ch.solve(&e);
            let schur = 1.0 / col[fi];
            if schur.is_finite() && lmax > 0.0 {
                (schur / lmax).max(0.0)
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    Ok(Some(Observability {
        eigenvalues,
        condition_number,
        focal_ratio,
    }))
}

fn unbounded() -> FocalBounds {
    FocalBounds {
        min: f64::MIN_POSITIVE,
        max: f64::MAX,
    }
}

/// Damped Gauss-Newton over correspondences with known pixel positions.
#[derive(Debug, Clone)]
pub struct GaussNewtonProvider {
    points: Vec<Vec3>,
    observed: DVector<f64>,
    lambda: f64,
}

impl GaussNewtonProvider {
    pub const DEFAULT_LAMBDA: f64 = 1e-6;

    pub fn new(correspondences: &[Correspondence]) -> Result<Self, AlignmentError> {
        if correspondences.len() < 4 {
            return Err(AlignmentError::InsufficientCorrespondences(correspondences.len()));
        }
        let mut observed = DVector::zeros(2 * correspondences.len());
        for (i, c) in correspondences.iter().enumerate() {
            let finite = c.model_point.iter().all(|v| v.is_finite())
                && c.observed_pixel.u.is_finite()
                && c.observed_pixel.v.is_finite();
            if !finite {
                return Err(AlignmentError::NonFiniteCorrespondence(i));
            }
            observed[2 * i] = c.observed_pixel.u;
            observed[2 * i + 1] = c.observed_pixel.v;
        }
        Ok(Self {
            points: correspondences.iter().map(|c| c.model_point).collect(),
            observed,
            lambda: Self::DEFAULT_LAMBDA,
        })
    }

    /// Residuals `projected - observed`.
    pub fn residuals(
        &self,
        state: &RefinementState,
        intr: &CameraIntrinsics,
    ) -> Result<DVector<f64>, AlignmentError> {
        Ok(project_stack(&self.points, &state.pose(), &state.intrinsics(intr))? - &self.observed)
    }

    pub fn rmse(&self, state: &RefinementState, intr: &CameraIntrinsics) -> Result<f64, AlignmentError> {
        let r = self.residuals(state, intr)?;
        Ok((r.norm_squared() / self.points.len() as f64).sqrt())
    }

    fn solve(
        &self,
        state: &RefinementState,
        intr: &CameraIntrinsics,
        lambda: f64,
    ) -> Result<UpdateVector, AlignmentError> {
        let r = self.residuals(state, intr)?;
        if r.iter().all(|v| *v == 0.0) {
            return Ok(UpdateVector::zero());
        }
        let pose = state.pose();
        let j = reprojection_jacobian(&self.points, &pose, &state.intrinsics(intr), &GN_PARAMS)?;
        let h = j.transpose() * &j;
        let g = j.transpose() * r;

        let eig = SymmetricEigen::new(h.clone()).eigenvalues;
        let lmax = eig.max();
        let lmin = eig.min();
        if lmax.is_nan() || lmax <= 0.0 || lmin <= 1e-14 * lmax {
            return Err(AlignmentError::DegenerateNormalEquations);
        }
        let mut a = h.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda * h[(i, i)];
        }
        let step = a
            .cholesky()
            .ok_or(AlignmentError::DegenerateNormalEquations)?
            .solve(&(-g));
        let mut step: Vec<f64> = step.iter().copied().collect();
        let rot_norm = (step[0] * step[0] + step[1] * step[1] + step[2] * step[2]).sqrt();
        if rot_norm > PI {
            let s = PI / rot_norm;
            step.iter_mut().for_each(|v| *v *= s);
        }

        // Convert (omega, dx, dy, dlogf) into the update-rule parameters.
        let f_next = step[5].exp() * state.f;
        Ok(UpdateVector {
            rot_update: Vec3::new(step[0], step[1], step[2]),
            v_x: step[3] * f_next / state.k,
            v_y: step[4] * f_next / state.k,
            v_f: step[5],
        })
    }
}

impl AlignmentProvider for GaussNewtonProvider {
    fn propose_update(
        &self,
        state: &RefinementState,
        ctx: &AlignmentContext<'_>,
    ) -> Result<UpdateVector, AlignmentError> {
        self.solve(state, ctx.intrinsics, self.lambda)
    }

    /// Levenberg damping: lambda grows tenfold and the step halves per attempt.
    fn damped_update(
        &self,
        state: &RefinementState,
        ctx: &AlignmentContext<'_>,
        _proposal: &UpdateVector,
        attempt: u32,
    ) -> Result<UpdateVector, AlignmentError> {
        let lambda = self.lambda * 10f64.powi(attempt as i32);
        Ok(self
            .solve(state, ctx.intrinsics, lambda)?
            .scaled(0.5f64.powi(attempt as i32)))
    }

    /// Root-mean-square reprojection error in pixels.
    fn discrepancy(
        &self,
        state: &RefinementState,
        ctx: &AlignmentContext<'_>,
    ) -> Result<f64, AlignmentError> {
        self.rmse(state, ctx.intrinsics)
    }
}

/// Finite-difference probe sizes in update-vector units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    /// Radians, per rotation axis.
    pub rotation: f64,
    /// Pixels.
    pub v_x: f64,
    pub v_y: f64,
    /// Log focal length.
    pub v_f: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self {
            rotation: 0.01,
            v_x: 0.5,
            v_y: 0.5,
            v_f: 0.02,
        }
    }
}

impl FdSteps {
    fn as_array(&self) -> [f64; 6] {
        [self.rotation, self.rotation, self.rotation, self.v_x, self.v_y, self.v_f]
    }
}

/// Derivative-free provider driven by silhouette overlap.
#[derive(Debug, Clone)]
pub struct SilhouetteFdProvider {
    steps: [f64; 6],
    /// Largest step per coordinate, in multiples of its probe size.
    max_step: f64,
}

impl SilhouetteFdProvider {
    pub fn new(steps: FdSteps) -> Result<Self, AlignmentError> {
        let steps = steps.as_array();
        if !steps.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(AlignmentError::InvalidStepSize);
        }
        Ok(Self { steps, max_step: 4.0 })
    }

    fn loss(&self, state: &RefinementState, ctx: &AlignmentContext<'_>) -> Result<f64, AlignmentError> {
        let img = render_silhouette(ctx.mesh, &state.pose(), &state.intrinsics(ctx.intrinsics))?;
        Ok(1.0 - silhouette_iou(&img, ctx.observation)?)
    }
}

impl AlignmentProvider for SilhouetteFdProvider {
    fn propose_update(
        &self,
        state: &RefinementState,
        ctx: &AlignmentContext<'_>,
    ) -> Result<UpdateVector, AlignmentError> {
        let l0 = self.loss(state, ctx)?;
        let bounds = unbounded();
        let probe = |i: usize, sign: f64| -> Result<f64, AlignmentError> {
            let mut d = [0.0; 6];
            d[i] = sign * self.steps[i];
            let s = apply_update(state, &UpdateVector::from_array(d), &bounds)
                .expect("probe steps are finite")
                .state;
            self.loss(&s, ctx)
        };
        let mut probes = [(0.0, 0.0); 6];
        for (i, p) in probes.iter_mut().enumerate() {
            *p = (probe(i, 1.0)?, probe(i, -1.0)?);
        }
        if probes.iter().all(|&(a, b)| a == l0 && b == l0) {
            return Err(AlignmentError::FlatLossRegion);
        }

        let mut step = [0.0; 6];
        for (i, &(plus, minus)) in probes.iter().enumerate() {
            let h = self.steps[i];
            let slope = (plus - minus) / (2.0 * h);
            let curvature = (plus + minus - 2.0 * l0) / (h * h);
            let limit = self.max_step * h;
            step[i] = if curvature > 0.0 {
                (-slope / curvature).clamp(-limit, limit)
            } else if slope != 0.0 {
                -slope.signum() * limit
            } else {
                0.0
            };
        }
        Ok(UpdateVector::from_array(step))
    }

    /// `1 - IoU` between the rendered state and the observation.
    fn discrepancy(
        &self,
        state: &RefinementState,
        ctx: &AlignmentContext<'_>,
    ) -> Result<f64, AlignmentError> {
        self.loss(state, ctx)
    }
}

/// Ground-truth correspondences: every mesh vertex paired with its projection.
pub fn vertex_correspondences(
    mesh: &Mesh,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Result<Vec<Correspondence>, AlignmentError> {
    mesh.vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            project_point(&transform_point(v, pose), intr)
                .map(|px| Correspondence {
                    model_point: *v,
                    observed_pixel: px,
                })
                .map_err(|_| AlignmentError::Projection(i))
        })
        .collect()
}

/// Rotation helper for perturbation experiments: `exp(omega) * r`.
pub fn perturb_rotation(r: &Rotation, omega: &Vec3) -> Rotation {
    Rotation::exp(omega).compose(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic_distance;

    fn setup(mesh: &Mesh) -> (RefinementState, CameraIntrinsics, Vec<Correspondence>) {
        let intr = CameraIntrinsics::centered(600.0, 640, 480);
        let gt = RefinementState {
            rotation: Rotation::from_axis_angle(&Vec3::new(0.4, 1.0, 0.3), 0.8).unwrap(),
            x: 0.05,
            y: -0.03,
            f: 600.0,
            k: 1.0,
        };
        let corr = vertex_correspondences(mesh, &gt.pose(), &intr).unwrap();
        (gt, intr, corr)
    }

    #[test]
    fn fixed_point_gives_zero_update() {
        let mesh = Mesh::cube(0.2);
        let (gt, intr, corr) = setup(&mesh);
        let obs = SilhouetteImage::empty(640, 480);
        let ctx = AlignmentContext { observation: &obs, mesh: &mesh, intrinsics: &intr };
        let gn = GaussNewtonProvider::new(&corr).unwrap();
        assert!(gn.propose_update(&gt, &ctx).unwrap().norm() <= 1e-8);
        assert_eq!(gn.discrepancy(&gt, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn x_offset_recovered_in_one_step() {
        let mesh = Mesh::cube(0.2);
        let (gt, intr, corr) = setup(&mesh);
        let obs = SilhouetteImage::empty(640, 480);
        let ctx = AlignmentContext { observation: &obs, mesh: &mesh, intrinsics: &intr };
        let gn = GaussNewtonProvider::new(&corr).unwrap();
        let start = RefinementState { x: gt.x + 0.04, ..gt };
        let dq = gn.propose_update(&start, &ctx).unwrap();
        let next = apply_update(&start, &dq, &FocalBounds::default()).unwrap().state;
        assert!((next.x - gt.x).abs() < 1e-6, "{}", next.x - gt.x);
        assert!((next.f - gt.f).abs() < 1e-6 * gt.f);
        assert!(geodesic_distance(&next.rotation, &gt.rotation) < 1e-6);
    }

    #[test]
    fn too_few_correspondences() {
        let mesh = Mesh::cube(0.2);
        let (_, _, corr) = setup(&mesh);
        assert_eq!(
            GaussNewtonProvider::new(&corr[..3]).unwrap_err(),
            AlignmentError::InsufficientCorrespondences(3)
        );
    }

    #[test]
    fn fd_at_optimum_is_small() {
        let mesh = Mesh::cube(0.2);
        let (gt, intr, _) = setup(&mesh);
        let obs = render_silhouette(&mesh, &gt.pose(), &intr).unwrap();
        let ctx = AlignmentContext { observation: &obs, mesh: &mesh, intrinsics: &intr };
        let fd = SilhouetteFdProvider::new(FdSteps::default()).unwrap();
        let dq = fd.propose_update(&gt, &ctx).unwrap().to_array();
        // With the center at its minimum, each Newton step is at most half a probe.
        for (d, h) in dq.iter().zip(FdSteps::default().as_array()) {
            assert!(d.abs() <= 0.5 * h + 1e-15, "{dq:?}");
        }
    }

    #[test]
    fn fd_moves_focal_toward_observation() {
        let mesh = Mesh::icosphere(0.12, 1);
        let intr = CameraIntrinsics::centered(600.0, 640, 480);
        let state = RefinementState {
            rotation: Rotation::from_axis_angle(&Vec3::new(0.1, 1.0, 0.0), 0.3).unwrap(),
            x: 0.0,
            y: 0.0,
            f: 600.0,
            k: 1.0,
        };
        let target = RefinementState { f: 660.0, ..state };
        let obs = render_silhouette(&mesh, &target.pose(), &target.intrinsics(&intr)).unwrap();
        let ctx = AlignmentContext { observation: &obs, mesh: &mesh, intrinsics: &intr };
        let fd = SilhouetteFdProvider::new(FdSteps::default()).unwrap();
        // Direct loss evaluation: larger f is closer to the observation.
        assert!(fd.loss(&target, &ctx).unwrap() < fd.loss(&state, &ctx).unwrap());
        let dq = fd.propose_update(&state, &ctx).unwrap();
        assert!(dq.v_f > 0.0, "{dq:?}");
    }

    #[test]
    fn fd_flat_when_disjoint() {
        let mesh = Mesh::cube(0.2);
        let (gt, intr, _) = setup(&mesh);
        let far = Pose::new(gt.rotation, Vec3::new(-0.7, 0.0, 1.0));
        let obs = render_silhouette(&mesh, &far, &intr).unwrap();
        let ctx = AlignmentContext { observation: &obs, mesh: &mesh, intrinsics: &intr };
        let fd = SilhouetteFdProvider::new(FdSteps::default()).unwrap();
        assert_eq!(fd.propose_update(&gt, &ctx).unwrap_err(), AlignmentError::FlatLossRegion);
        assert_eq!(
            SilhouetteFdProvider::new(FdSteps { v_f: 0.0, ..Default::default() }).unwrap_err(),
            AlignmentError::InvalidStepSize
        );
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mesh = Mesh::icosphere(0.1, 0);
        let (gt, intr, _) = setup(&mesh);
        let params = [
            Param::RotX, Param::RotY, Param::RotZ, Param::X, Param::Y,
            Param::Tz, Param::Vx, Param::Vy, Param::F, Param::LogF,
        ];
        let pose = gt.pose();
        let j = reprojection_jacobian(mesh.vertices(), &pose, &intr, &params).unwrap();
        let h = 1e-6;
        for (c, p) in params.iter().enumerate() {
            let eval = |s: f64| {
                let mut pose = pose;
                let mut i = intr;
                match p {
                    Param::RotX => pose.rotation = perturb_rotation(&pose.rotation, &(Vec3::x() * s)),
                    Param::RotY => pose.rotation = perturb_rotation(&pose.rotation, &(Vec3::y() * s)),
                    Param::RotZ => pose.rotation = perturb_rotation(&pose.rotation, &(Vec3::z() * s)),
                    Param::X => pose.translation.x += s,
                    Param::Y => pose.translation.y += s,
                    Param::Tz => pose.translation.z += s,
                    Param::Vx => pose.translation.x += s * gt.k / gt.f,
                    Param::Vy => pose.translation.y += s * gt.k / gt.f,
                    Param::F => i.f += s,
                    Param::LogF => i.f *= s.exp(),
                }
                project_stack(mesh.vertices(), &pose, &i).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            for r in 0..fd.len() {
                let (a, b) = (j[(r, c)], fd[r]);
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{p:?} row {r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn planar_depth_and_focal_are_collinear() {
        let quad = Mesh::quad(0.3, 0.2);
        let intr = CameraIntrinsics::centered(500.0, 640, 480);
        let pose = Pose::new(Rotation::from_axis_angle(&Vec3::z(), 0.2).unwrap(), Vec3::new(0.02, 0.01, 1.0));
        let obs = observability(quad.vertices(), &pose, &intr, &[Param::Tz, Param::F]).unwrap().unwrap();
        assert!(obs.condition_number > 1e8);
        let free = observability(quad.vertices(), &pose, &intr, &FREE_DEPTH_PARAMS).unwrap().unwrap();
        assert!(free.focal_ratio < 1e-10, "{}", free.focal_ratio);
        let cube = Mesh::cube(0.2);
        let pinned = observability(cube.vertices(), &pose, &intr, &PINNED_PARAMS).unwrap().unwrap();
        assert!(pinned.focal_ratio > 1e-6, "{}", pinned.focal_ratio);
        assert!(observability(cube.vertices(), &pose, &intr, &[Param::X]).unwrap().is_none());
    }
}
