//! Pose and focal-length refinement with the object depth pinned to a constant.
//!
//! Jointly estimating focal length and depth from a single image is
//! ill-posed: scaling both by the same factor barely changes the projection,
//! and for fronto-parallel planar content it changes nothing at all. This
//! crate pins the depth to a constant `k`, rescales the focal length to
//! compensate ([`reparam`]), and refines rotation, lateral translation and
//! focal length with a render-and-compare loop ([`refiner`]) driven by
//! pluggable [`alignment`] providers. [`experiments`] generates synthetic
//! scenes, evaluates refinements and measures the depth/focal ambiguity.

pub mod alignment;
pub mod experiments;
pub mod geometry;
pub mod mesh;
pub mod refiner;
pub mod renderer;
pub mod reparam;

pub use alignment::{AlignmentContext, AlignmentProvider, Correspondence, GaussNewtonProvider, SilhouetteFdProvider};
pub use geometry::{CameraIntrinsics, PixelPoint, Pose, Rotation, Vec3};
pub use mesh::Mesh;
pub use refiner::{apply_update, refine, RefinementConfig, RefinementState, RefinementTrajectory, UpdateVector};
pub use renderer::{render_silhouette, silhouette_iou, BBox2D, SilhouetteImage};
pub use reparam::{reannotate, restore_metric, AnnotatedScene};
