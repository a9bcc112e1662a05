//! Pinhole projection and rigid-body math.
//!
//! Conventions used throughout the crate:
//!
//! * Camera frame: x right, y down, z forward (optical axis).
//! * Pixel coordinates are continuous with the origin at the top-left image
//!   corner; integer pixel `(row, col)` has its center at `(col + 0.5, row + 0.5)`.
//! * Rotations are unit quaternions stored in canonical form (`w >= 0`).

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Points and axis vectors, in meters when used as positions.
pub type Vec3 = Vector3<f64>;

/// Depths at or below this value are treated as lying on or behind the camera plane.
pub const DEPTH_EPSILON: f64 = 1e-9;

const AXIS_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point depth {0} is not in front of the camera")]
    NonPositiveDepth(f64),
    #[error("rotation axis has zero length for non-zero angle {0}")]
    ZeroAxis(f64),
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
}

/// A 3D rotation as a canonical unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a rotation from raw quaternion components `(w, x, y, z)`.
    ///
    /// The input is normalized unless it is already unit length to within a
    /// few ulps; this keeps construction idempotent on already-normalized
    /// input, which serialization round trips rely on.
    pub fn from_wxyz(q: [f64; 4]) -> Result<Self, GeometryError> {
        let n2: f64 = q.iter().map(|c| c * c).sum();
        if !n2.is_finite() || n2 <= 0.0 {
            return Err(GeometryError::DegenerateQuaternion);
        }
        let [mut w, mut x, mut y, mut z] = q;
        if (n2 - 1.0).abs() > 4.0 * f64::EPSILON {
            let n = n2.sqrt();
            w /= n;
            x /= n;
            y /= n;
            z /= n;
        }
        Ok(Self::canonical(w, x, y, z))
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else {
            [x, y, z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        // `0.0 - 0.0` keeps signed zeros tidy after a flip.
        if flip {
            Rotation {
                w: 0.0 - w,
                x: 0.0 - x,
                y: 0.0 - y,
                z: 0.0 - z,
            }
        } else {
            Rotation { w, x, y, z }
        }
    }

    fn normalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::canonical(w / n, x / n, y / n, z / n)
    }

    /// Quaternion components `(w, x, y, z)`.
    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, GeometryError> {
        if angle == 0.0 {
            return Ok(Self::IDENTITY);
        }
        let n = axis.norm();
        if n < AXIS_EPSILON {
            return Err(GeometryError::ZeroAxis(angle));
        }
        let half = 0.5 * angle;
        let s = half.sin() / n;
        Ok(Self::normalized(half.cos(), axis.x * s, axis.y * s, axis.z * s))
    }

    /// Exponential map from a rotation vector (axis scaled by angle in radians).
    pub fn exp(omega: &Vec3) -> Self {
        let theta2 = omega.norm_squared();
        let theta = theta2.sqrt();
        let (real, imag_scale) = if theta < 1e-8 {
            (1.0 - theta2 / 8.0, 0.5 - theta2 / 48.0)
        } else {
            let half = 0.5 * theta;
            (half.cos(), half.sin() / theta)
        };
        Self::normalized(
            real,
            omega.x * imag_scale,
            omega.y * imag_scale,
            omega.z * imag_scale,
        )
    }

    /// Logarithm map; returns the rotation vector with angle in `[0, pi]`.
    pub fn log(&self) -> Vec3 {
        let v = Vec3::new(self.x, self.y, self.z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(self.w);
        v * (angle / s)
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.w, 0.0 - self.x, 0.0 - self.y, 0.0 - self.z)
    }

    /// Composition `self * rhs`: applies `rhs` first, then `self`.
    pub fn compose(&self, rhs: &Rotation) -> Rotation {
        let (a, b) = (self, rhs);
        Self::normalized(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates a vector with the quaternion sandwich product.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn angle(&self) -> f64 {
        geodesic_distance(&Self::IDENTITY, self)
    }
}

/// Object-to-camera rigid transform. `translation.z` is the object depth `t_z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn tz(&self) -> f64 {
        self.translation.z
    }
}

/// Single-focal-length pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// Intrinsics with the principal point at the image center.
    pub fn centered(f: f64, width: u32, height: u32) -> Self {
        Self {
            f,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
        }
    }

    pub fn with_focal(&self, f: f64) -> Self {
        Self { f, ..*self }
    }

    pub fn is_valid(&self) -> bool {
        self.f.is_finite()
            && self.f > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.width >= 1
            && self.height >= 1
    }

    pub fn diagonal(&self) -> f64 {
        f64::from(self.width).hypot(f64::from(self.height))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Maps an object-space point into the camera frame: `R p + t`.
pub fn transform_point(p: &Vec3, pose: &Pose) -> Vec3 {
    pose.rotation.rotate(p) + pose.translation
}

/// Pinhole projection `u = f x / z + cx`, `v = f y / z + cy`.
pub fn project_point(p_cam: &Vec3, intr: &CameraIntrinsics) -> Result<PixelPoint, GeometryError> {
    if p_cam.z.is_nan() || p_cam.z <= DEPTH_EPSILON {
        return Err(GeometryError::NonPositiveDepth(p_cam.z));
    }
    Ok(PixelPoint {
        u: intr.f * (p_cam.x / p_cam.z) + intr.cx,
        v: intr.f * (p_cam.y / p_cam.z) + intr.cy,
    })
}

/// Angle of the relative rotation between `a` and `b`, in `[0, pi]`.
pub fn geodesic_distance(a: &Rotation, b: &Rotation) -> f64 {
    if a == b {
        return 0.0;
    }
    let [aw, ax, ay, az] = a.wxyz();
    let [bw, bx, by, bz] = b.wxyz();
    // a^-1 * b
    let w = aw * bw + ax * bx + ay * by + az * bz;
    let x = aw * bx - ax * bw - ay * bz + az * by;
    let y = aw * by + ax * bz - ay * bw - az * bx;
    let z = aw * bz - ax * by + ay * bx - az * bw;
    let s = (x * x + y * y + z * z).sqrt();
    2.0 * s.atan2(w.abs())
}

pub fn rotation_from_axis_angle(axis: &Vec3, angle: f64) -> Result<Rotation, GeometryError> {
    Rotation::from_axis_angle(axis, angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics {
            f: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
        )
            .prop_filter_map("degenerate", |(w, x, y, z)| {
                let n = (w * w + x * x + y * y + z * z).sqrt();
                (n > 1e-3).then(|| Rotation::from_wxyz([w, x, y, z]).unwrap())
            })
    }

    fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
        (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    #[test]
    fn origin_maps_to_translation() {
        let pose = Pose::new(
            Rotation::from_axis_angle(&Vec3::new(0.3, -1.0, 2.0), 0.7).unwrap(),
            Vec3::new(1.0, 2.0, 3.0),
        );
        assert_eq!(transform_point(&Vec3::zeros(), &pose), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn quarter_turn_about_z_permutes_axes() {
        let pose = Pose::new(
            Rotation::from_axis_angle(&Vec3::z(), FRAC_PI_2).unwrap(),
            Vec3::zeros(),
        );
        let p = transform_point(&Vec3::x(), &pose);
        assert!((p - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn transform_matches_matrix_oracle() {
        let rot = Rotation::from_wxyz([0.4, -0.3, 0.8, 0.2]).unwrap();
        let t = Vec3::new(0.1, -0.2, 2.5);
        let p = Vec3::new(0.2, -0.1, 0.3);
        // Matrix built independently from the quaternion entries.
        let [w, x, y, z] = rot.wxyz();
        let m = [
            [w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ];
        let expected: Vec<f64> = (0..3)
            .map(|i| m[i][0] * p.x + m[i][1] * p.y + m[i][2] * p.z + t[i])
            .collect();
        let got = transform_point(&p, &Pose::new(rot, t));
        for i in 0..3 {
            assert!((got[i] - expected[i]).abs() < 1e-12);
        }
        assert!((rot.matrix() * p + t - got).norm() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let i = intr();
        assert_eq!(
            project_point(&Vec3::new(0.0, 0.0, 1.5), &i).unwrap(),
            PixelPoint::new(320.0, 240.0)
        );
        let p = project_point(&Vec3::new(0.5, 0.0, 2.0), &i).unwrap();
        assert!((p.u - (500.0 * 0.5 / 2.0 + 320.0)).abs() < 1e-12);
        assert_eq!(p.v, 240.0);
        assert!(matches!(
            project_point(&Vec3::zeros(), &i),
            Err(GeometryError::NonPositiveDepth(_))
        ));
        assert!(project_point(&Vec3::new(0.0, 0.0, -1.0), &i).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let id = Rotation::IDENTITY;
        assert_eq!(geodesic_distance(&id, &id), 0.0);
        let q = Rotation::from_wxyz([0.5, 0.5, -0.5, 0.5]).unwrap();
        // Raw negation bypasses canonicalization.
        let neg = Rotation {
            w: -q.w,
            x: -q.x,
            y: -q.y,
            z: -q.z,
        };
        assert!(geodesic_distance(&q, &neg) < 1e-15);
        let rz = Rotation::from_axis_angle(&Vec3::z(), FRAC_PI_2).unwrap();
        assert!((geodesic_distance(&id, &rz) - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn axis_angle_examples() {
        assert_eq!(
            Rotation::from_axis_angle(&Vec3::new(0.0, 0.0, 0.0), 0.0).unwrap(),
            Rotation::IDENTITY
        );
        let half_turn = Rotation::from_axis_angle(&Vec3::z(), PI).unwrap();
        let [w, x, y, z] = half_turn.wxyz();
        assert!(w.abs() < 1e-15 && x == 0.0 && y == 0.0 && (z - 1.0).abs() < 1e-15);
        assert!(w >= 0.0);
        assert_eq!(
            Rotation::from_axis_angle(&Vec3::zeros(), 0.1),
            Err(GeometryError::ZeroAxis(0.1))
        );
    }

    #[test]
    fn canonical_sign_when_w_is_zero() {
        let r = Rotation::from_wxyz([0.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!(r.wxyz(), [0.0, 0.0, 1.0, 0.0]);
        let r = Rotation::from_wxyz([-0.0, -0.0, 0.0, -2.0]).unwrap();
        assert_eq!(r.wxyz()[3], 1.0);
    }

    #[test]
    fn construction_is_idempotent() {
        let r = Rotation::from_wxyz([0.3, -0.2, 0.9, 0.1]).unwrap();
        assert_eq!(Rotation::from_wxyz(r.wxyz()).unwrap(), r);
        assert_eq!(Rotation::from_wxyz([0.0; 4]), Err(GeometryError::DegenerateQuaternion));
    }

    #[test]
    fn exp_small_angles_are_continuous() {
        let w = Vec3::new(3e-9, -1e-9, 2e-9);
        let a = Rotation::exp(&w);
        let b = Rotation::from_axis_angle(&w, w.norm()).unwrap();
        assert!(geodesic_distance(&a, &b) < 1e-15);
        assert_eq!(Rotation::exp(&Vec3::zeros()), Rotation::IDENTITY);
    }

    proptest! {
        #[test]
        fn unit_norm_after_compose(a in arb_rotation(), b in arb_rotation()) {
            let c = a.compose(&b);
            let n: f64 = c.wxyz().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-9);
            prop_assert!(c.wxyz()[0] >= 0.0);
        }

        #[test]
        fn axis_angle_round_trip(axis in arb_vec(1.0), angle in -PI..PI) {
            prop_assume!(axis.norm() > 1e-3);
            let r = Rotation::from_axis_angle(&axis, angle).unwrap();
            prop_assert!((geodesic_distance(&Rotation::IDENTITY, &r) - angle.abs()).abs() < 1e-9);
            let back = Rotation::exp(&r.log());
            prop_assert!(geodesic_distance(&back, &r) < 1e-9);
        }

        #[test]
        fn geodesic_triangle_inequality(a in arb_rotation(), b in arb_rotation(), c in arb_rotation()) {
            let ab = geodesic_distance(&a, &b);
            let bc = geodesic_distance(&b, &c);
            let ac = geodesic_distance(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!((ab - geodesic_distance(&b, &a)).abs() < 1e-12);
            prop_assert!((0.0..=PI + 1e-12).contains(&ab));
        }

        #[test]
        fn rigid_transform_preserves_distances(
            rot in arb_rotation(), t in arb_vec(5.0), p in arb_vec(2.0), q in arb_vec(2.0)
        ) {
            let pose = Pose::new(rot, t);
            let d0 = (p - q).norm();
            let d1 = (transform_point(&p, &pose) - transform_point(&q, &pose)).norm();
            prop_assert!((d0 - d1).abs() < 1e-9);
        }

        #[test]
        fn co_scaling_invariance_at_reference_depth(
            x in -2.0f64..2.0, y in -2.0f64..2.0, tz in 0.2f64..6.0,
            f in 50.0f64..3000.0, alpha in 0.1f64..10.0
        ) {
            let i = CameraIntrinsics { f, ..intr() };
            let a = project_point(&Vec3::new(x, y, tz), &i).unwrap();
            let b = project_point(&Vec3::new(x, y, alpha * tz), &i.with_focal(alpha * f)).unwrap();
            prop_assert!(a.distance(&b) < 1e-9);
        }

        #[test]
        fn co_scaling_is_bit_exact_for_dyadic_factors(
            x in -2.0f64..2.0, y in -2.0f64..2.0, tz in 0.2f64..6.0,
            f in 50.0f64..3000.0, e in -4i32..5
        ) {
            let alpha = 2f64.powi(e);
            let i = CameraIntrinsics { f, ..intr() };
            let a = project_point(&Vec3::new(x, y, tz), &i).unwrap();
            let b = project_point(&Vec3::new(x, y, alpha * tz), &i.with_focal(alpha * f)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
