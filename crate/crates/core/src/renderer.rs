//! Silhouette rasterization of triangle meshes under a pinhole camera.
//!
//! A pixel is set when its center lies inside (or on the boundary of) the
//! projection of at least one triangle. There is no depth buffer and no
//! culling: the silhouette is the union of all triangle footprints.

use crate::geometry::{
    project_point, transform_point, CameraIntrinsics, PixelPoint, Pose, DEPTH_EPSILON,
};
use crate::mesh::Mesh;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("vertex {index} is at depth {depth}, not in front of the camera")]
    VertexBehindCamera { index: usize, depth: f64 },
    #[error("mesh has no renderable geometry")]
    EmptyMesh,
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
}

/// Row-major binary occupancy mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteImage {
    width: u32,
    height: u32,
    mask: Vec<bool>,
}

impl SilhouetteImage {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width as usize * height as usize],
        }
    }

    /// Wraps an existing mask; `None` if its length is not `width * height`.
    pub fn from_mask(width: u32, height: u32, mask: Vec<bool>) -> Option<Self> {
        (mask.len() == width as usize * height as usize).then_some(Self {
            width,
            height,
            mask,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        self.mask[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        let w = self.width as usize;
        self.mask[row as usize * w + col as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Mean pixel-center coordinate of the set pixels.
    pub fn centroid(&self) -> Option<PixelPoint> {
        let w = self.width as usize;
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
        for (i, _) in self.mask.iter().enumerate().filter(|(_, &b)| b) {
            su += (i % w) as f64 + 0.5;
            sv += (i / w) as f64 + 0.5;
            n += 1;
        }
        (n > 0).then(|| PixelPoint::new(su / n as f64, sv / n as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox2D {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox2D {
    pub fn center(&self) -> PixelPoint {
        PixelPoint::new(0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }
}

/// Projects every mesh vertex, failing on the first one not in front of the camera.
pub fn project_vertices(
    mesh: &Mesh,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Result<Vec<PixelPoint>, RenderError> {
    mesh.vertices()
        .iter()
        .enumerate()
        .map(|(index, v)| {
            let p = transform_point(v, pose);
            if p.z.is_nan() || p.z <= DEPTH_EPSILON {
                return Err(RenderError::VertexBehindCamera { index, depth: p.z });
            }
            project_point(&p, intr).map_err(|_| RenderError::VertexBehindCamera { index, depth: p.z })
        })
        .collect()
}

/// Signed edge function of `p` relative to the directed edge `a -> b`.
#[inline]
pub(crate) fn edge(a: &PixelPoint, b: &PixelPoint, pu: f64, pv: f64) -> f64 {
    (b.u - a.u) * (pv - a.v) - (b.v - a.v) * (pu - a.u)
}

/// Inclusive pixel index range whose centers may fall within `[lo, hi]`,
/// widened by one pixel and clamped to `[0, n)`.
fn pixel_span(lo: f64, hi: f64, n: u32) -> Option<(u32, u32)> {
    let first = (lo - 0.5).floor() - 1.0;
    let last = (hi - 0.5).ceil() + 1.0;
    if last < 0.0 || first > f64::from(n) - 1.0 || !first.is_finite() || !last.is_finite() {
        return None;
    }
    let first = first.max(0.0) as u32;
    let last = last.min(f64::from(n) - 1.0) as u32;
    Some((first, last))
}

pub fn render_silhouette(
    mesh: &Mesh,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Result<SilhouetteImage, RenderError> {
    if mesh.triangles().is_empty() {
        return Err(RenderError::EmptyMesh);
    }
    let pts = project_vertices(mesh, pose, intr)?;
    let mut image = SilhouetteImage::empty(intr.width, intr.height);
    let width = intr.width as usize;

    for tri in mesh.triangles() {
        let a = pts[tri[0]];
        let (mut b, mut c) = (pts[tri[1]], pts[tri[2]]);
        let area = edge(&a, &b, c.u, c.v);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            std::mem::swap(&mut b, &mut c);
        }
        let Some((c0, c1)) = pixel_span(a.u.min(b.u).min(c.u), a.u.max(b.u).max(c.u), intr.width)
        else {
            continue;
        };
        let Some((r0, r1)) = pixel_span(a.v.min(b.v).min(c.v), a.v.max(b.v).max(c.v), intr.height)
        else {
            continue;
        };
        for row in r0..=r1 {
            let pv = f64::from(row) + 0.5;
            let line = &mut image.mask[row as usize * width..(row as usize + 1) * width];
            for col in c0..=c1 {
                let pu = f64::from(col) + 0.5;
                if edge(&a, &b, pu, pv) >= 0.0
                    && edge(&b, &c, pu, pv) >= 0.0
                    && edge(&c, &a, pu, pv) >= 0.0
                {
                    line[col as usize] = true;
                }
            }
        }
    }
    Ok(image)
}

/// Intersection over union of two masks. Two empty masks have IoU 1.
pub fn silhouette_iou(a: &SilhouetteImage, b: &SilhouetteImage) -> Result<f64, RenderError> {
    if a.width != b.width || a.height != b.height {
        return Err(RenderError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.mask.iter().zip(&b.mask) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Tight bounds of the projected vertices, not clipped to the image.
pub fn projected_bbox(
    mesh: &Mesh,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Result<BBox2D, RenderError> {
    if mesh.is_empty() {
        return Err(RenderError::EmptyMesh);
    }
    let pts = project_vertices(mesh, pose, intr)?;
    Ok(pts.iter().fold(
        BBox2D {
            u_min: f64::INFINITY,
            v_min: f64::INFINITY,
            u_max: f64::NEG_INFINITY,
            v_max: f64::NEG_INFINITY,
        },
        |bb, p| BBox2D {
            u_min: bb.u_min.min(p.u),
            v_min: bb.v_min.min(p.v),
            u_max: bb.u_max.max(p.u),
            v_max: bb.v_max.max(p.v),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Rotation, Vec3};

    fn intr(w: u32, h: u32) -> CameraIntrinsics {
        CameraIntrinsics::centered(500.0, w, h)
    }

    fn at(z: f64) -> Pose {
        Pose::new(Rotation::IDENTITY, Vec3::new(0.0, 0.0, z))
    }

    #[test]
    fn full_frustum_quad_covers_everything() {
        let i = intr(64, 48);
        // Quad larger than the frustum at depth 1.
        let q = Mesh::quad(1.0, 1.0);
        let img = render_silhouette(&q, &at(1.0), &i).unwrap();
        assert_eq!(img.count(), 64 * 48);
    }

    #[test]
    fn off_screen_mesh_is_blank() {
        let i = intr(64, 48);
        let pose = Pose::new(Rotation::IDENTITY, Vec3::new(5.0, 0.0, 1.0));
        let img = render_silhouette(&Mesh::cube(0.2), &pose, &i).unwrap();
        assert_eq!(img.count(), 0);
    }

    #[test]
    fn vertex_behind_camera_is_an_error() {
        let i = intr(64, 48);
        let err = render_silhouette(&Mesh::cube(0.2), &at(0.05), &i).unwrap_err();
        assert!(matches!(err, RenderError::VertexBehindCamera { .. }));
        assert_eq!(
            render_silhouette(&Mesh::default(), &at(1.0), &i),
            Err(RenderError::EmptyMesh)
        );
    }

    #[test]
    fn degenerate_triangles_are_skipped() {
        let m = Mesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.2, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(render_silhouette(&m, &at(1.0), &intr(32, 32)).unwrap().count(), 0);
    }

    #[test]
    fn winding_does_not_matter() {
        let i = intr(40, 30);
        let v = vec![Vec3::new(-0.02, -0.01, 0.0), Vec3::new(0.015, -0.02, 0.0), Vec3::new(0.0, 0.02, 0.0)];
        let ccw = Mesh::new(v.clone(), vec![[0, 1, 2]]).unwrap();
        let cw = Mesh::new(v, vec![[0, 2, 1]]).unwrap();
        let a = render_silhouette(&ccw, &at(1.0), &i).unwrap();
        assert!(a.count() > 0);
        assert_eq!(a, render_silhouette(&cw, &at(1.0), &i).unwrap());
    }

    #[test]
    fn iou_examples() {
        let mut a = SilhouetteImage::empty(4, 1);
        let mut b = SilhouetteImage::empty(4, 1);
        assert_eq!(silhouette_iou(&a, &b).unwrap(), 1.0);
        a.set(0, 0, true);
        a.set(0, 1, true);
        assert_eq!(silhouette_iou(&a, &a).unwrap(), 1.0);
        b.set(0, 2, true);
        b.set(0, 3, true);
        assert_eq!(silhouette_iou(&a, &b).unwrap(), 0.0);
        b.set(0, 3, false);
        b.set(0, 1, true);
        assert_eq!(silhouette_iou(&a, &b).unwrap(), 1.0 / 3.0);
        assert!(matches!(
            silhouette_iou(&a, &SilhouetteImage::empty(2, 2)),
            Err(RenderError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn bbox_examples() {
        let i = intr(640, 480);
        let single = Mesh::new(vec![Vec3::zeros()], vec![]).unwrap();
        let bb = projected_bbox(&single, &at(1.0), &i).unwrap();
        assert_eq!((bb.u_min, bb.u_max, bb.v_min, bb.v_max), (320.0, 320.0, 240.0, 240.0));

        let pair = Mesh::new(vec![Vec3::new(-0.1, 0.05, 0.0), Vec3::new(0.1, -0.05, 0.0)], vec![]).unwrap();
        let bb = projected_bbox(&pair, &at(2.0), &i).unwrap();
        assert!((bb.center().u - 320.0).abs() < 1e-12 && (bb.center().v - 240.0).abs() < 1e-12);
        assert_eq!(projected_bbox(&Mesh::default(), &at(1.0), &i), Err(RenderError::EmptyMesh));
    }

    #[test]
    fn bbox_matches_per_vertex_projection() {
        let i = intr(640, 480);
        let mesh = Mesh::icosphere(0.1, 1);
        let pose = Pose::new(
            Rotation::from_axis_angle(&Vec3::new(1.0, 2.0, -0.5), 0.9).unwrap(),
            Vec3::new(0.07, -0.04, 1.3),
        );
        let bb = projected_bbox(&mesh, &pose, &i).unwrap();
        let pts: Vec<PixelPoint> = mesh
            .vertices()
            .iter()
            .map(|v| project_point(&(pose.rotation.matrix() * v + pose.translation), &i).unwrap())
            .collect();
        let umin = pts.iter().map(|p| p.u).fold(f64::INFINITY, f64::min);
        let vmax = pts.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max);
        assert!((bb.u_min - umin).abs() < 1e-9 && (bb.v_max - vmax).abs() < 1e-9);
    }

    #[test]
    fn x_translation_shifts_centroid() {
        let i = intr(320, 240);
        let mesh = Mesh::cube(0.2);
        let rot = Rotation::from_axis_angle(&Vec3::new(0.3, 1.0, 0.2), 0.5).unwrap();
        let tz = 1.5;
        let delta = 0.05;
        let a = render_silhouette(&mesh, &Pose::new(rot, Vec3::new(0.0, 0.0, tz)), &i).unwrap();
        let b = render_silhouette(&mesh, &Pose::new(rot, Vec3::new(delta, 0.0, tz)), &i).unwrap();
        let shift = b.centroid().unwrap().u - a.centroid().unwrap().u;
        assert!((shift - i.f * delta / tz).abs() < 0.5, "shift {shift}");
    }
}
