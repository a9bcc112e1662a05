//! Iterative render-and-compare refinement with the depth pinned to `k`.
//!
//! The refined state holds rotation, `x`, `y` and the focal length `f`; the
//! depth is the constant `k` for the whole run. An [`AlignmentProvider`]
//! proposes an [`UpdateVector`] and [`apply_update`] maps it to the next state:
//!
//! ```text
//! f' = exp(v_f) * f
//! x' = (v_x / f') * k + x
//! y' = (v_y / f') * k + y
//! R' = exp(rot_update) * R
//! ```
//!
//! The focal length is updated first since the translation updates divide by
//! the new focal length. With `f` held fixed, `v_x` is exactly the shift of
//! the projected object center in pixels.

use crate::alignment::{AlignmentContext, AlignmentError, AlignmentProvider};
use crate::geometry::{CameraIntrinsics, Pose, Rotation, Vec3};
use crate::renderer::BBox2D;
use thiserror::Error;

/// Maximum number of damped retries after a step that increases the discrepancy.
pub const MAX_DAMPED_RETRIES: u32 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error("update vector has non-finite components")]
    NonFiniteUpdate,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("bounding box is degenerate: {0:?}")]
    DegenerateBBox(BBox2D),
    #[error("reference depth k = {0} must be positive")]
    NonPositiveK(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("iteration {iteration}: alignment provider failed: {source}")]
    Provider {
        iteration: usize,
        #[source]
        source: AlignmentError,
    },
    #[error("iteration {iteration}: {source}")]
    Update {
        iteration: usize,
        #[source]
        source: UpdateError,
    },
    #[error("observation is {0}x{1} but intrinsics describe a {2}x{3} image")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("invalid refinement config: {0}")]
    InvalidConfig(&'static str),
}

/// Rotation, lateral translation and focal length, with depth pinned to `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementState {
    pub rotation: Rotation,
    pub x: f64,
    pub y: f64,
    pub f: f64,
    pub k: f64,
}

impl RefinementState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.rotation, Vec3::new(self.x, self.y, self.k))
    }

    /// `base` with its focal length replaced by the state's.
    pub fn intrinsics(&self, base: &CameraIntrinsics) -> CameraIntrinsics {
        base.with_focal(self.f)
    }

    pub fn from_pose(pose: &Pose, f: f64) -> Self {
        Self {
            rotation: pose.rotation,
            x: pose.translation.x,
            y: pose.translation.y,
            f,
            k: pose.translation.z,
        }
    }
}

/// Output of an alignment provider, in the parameterization of [`apply_update`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateVector {
    /// Pixel-scaled translation updates.
    pub v_x: f64,
    pub v_y: f64,
    /// Log-scale focal update.
    pub v_f: f64,
    /// Axis-angle rotation increment, applied on the left.
    pub rot_update: Vec3,
}

impl UpdateVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Packs as `[rx, ry, rz, v_x, v_y, v_f]`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.rot_update.x,
            self.rot_update.y,
            self.rot_update.z,
            self.v_x,
            self.v_y,
            self.v_f,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            rot_update: Vec3::new(a[0], a[1], a[2]),
            v_x: a[3],
            v_y: a[4],
            v_f: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * s))
    }

    /// Update that moves `from` to `to` exactly under [`apply_update`]
    /// (up to rounding and absent clamping).
    pub fn between(from: &RefinementState, to: &RefinementState) -> Self {
        let k = from.k;
        Self {
            v_f: (to.f / from.f).ln(),
            v_x: (to.x - from.x) * to.f / k,
            v_y: (to.y - from.y) * to.f / k,
            rot_update: to.rotation.compose(&from.rotation.inverse()).log(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for FocalBounds {
    fn default() -> Self {
        Self {
            min: 25.0,
            max: 25000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedUpdate {
    pub state: RefinementState,
    /// Whether the focal length hit one of the bounds.
    pub clamped: bool,
}

/// Applies one update. Order: `f`, then `x`, `y`, then rotation.
pub fn apply_update(
    state: &RefinementState,
    dq: &UpdateVector,
    bounds: &FocalBounds,
) -> Result<AppliedUpdate, UpdateError> {
    if !dq.is_finite() {
        return Err(UpdateError::NonFiniteUpdate);
    }
    let k = state.k;
    let raw_f = dq.v_f.exp() * state.f;
    let f = raw_f.clamp(bounds.min, bounds.max);
    let clamped = f != raw_f;
    let x = (dq.v_x / f) * k + state.x;
    let y = (dq.v_y / f) * k + state.y;
    let rotation = Rotation::exp(&dq.rot_update).compose(&state.rotation);
    Ok(AppliedUpdate {
        state: RefinementState {
            rotation,
            x,
            y,
            f,
            k,
        },
        clamped,
    })
}

/// Initial state from a detection box: focal length set to the image
/// diagonal and the box center back-projected to depth `k`.
pub fn init_state(
    bbox: &BBox2D,
    intr_guess: &CameraIntrinsics,
    k: f64,
) -> Result<RefinementState, InitError> {
    let ok = [bbox.u_min, bbox.v_min, bbox.u_max, bbox.v_max]
        .iter()
        .all(|v| v.is_finite())
        && bbox.width() > 0.0
        && bbox.height() > 0.0;
    if !ok {
        return Err(InitError::DegenerateBBox(*bbox));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(InitError::NonPositiveK(k));
    }
    let f = intr_guess.diagonal();
    let c = bbox.center();
    Ok(RefinementState {
        rotation: Rotation::IDENTITY,
        x: (c.u - intr_guess.cx) * k / f,
        y: (c.v - intr_guess.cy) * k / f,
        f,
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    pub max_iterations: usize,
    pub stop_update_norm: f64,
    pub stop_loss: f64,
    pub bounds: FocalBounds,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            stop_update_norm: 1e-6,
            stop_loss: 1e-4,
            bounds: FocalBounds::default(),
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if self.max_iterations == 0 {
            return Err(RefineError::InvalidConfig("max_iterations must be positive"));
        }
        if !(self.stop_update_norm > 0.0 && self.stop_loss > 0.0) {
            return Err(RefineError::InvalidConfig("stopping thresholds must be positive"));
        }
        if !(self.bounds.min > 0.0 && self.bounds.min < self.bounds.max) {
            return Err(RefineError::InvalidConfig("focal bounds must satisfy 0 < f_min < f_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    ConvergedByUpdate,
    ConvergedByLoss,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ConvergedByUpdate => "converged-by-update",
            Termination::ConvergedByLoss => "converged-by-loss",
            Termination::MaxIterations => "max-iterations",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEntry {
    pub iteration: usize,
    pub state: RefinementState,
    pub loss: f64,
    pub clamped: bool,
}

/// Accepted states of one run, starting with the initial state at iteration 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementTrajectory {
    pub entries: Vec<TrajectoryEntry>,
    pub termination: Termination,
}

impl RefinementTrajectory {
    pub fn final_entry(&self) -> &TrajectoryEntry {
        self.entries.last().expect("trajectory always holds the initial state")
    }

    pub fn final_state(&self) -> &RefinementState {
        &self.final_entry().state
    }

    /// Number of accepted updates.
    pub fn iterations(&self) -> usize {
        self.entries.len() - 1
    }
}

/// Runs the render-and-compare loop until one of the stopping rules fires.
///
/// A step that increases the provider's discrepancy is rejected and retried
/// with up to [`MAX_DAMPED_RETRIES`] damped proposals; if none is accepted the
/// run stops as converged-by-update.
pub fn refine(
    init: &RefinementState,
    ctx: &AlignmentContext<'_>,
    provider: &dyn AlignmentProvider,
    cfg: &RefinementConfig,
) -> Result<RefinementTrajectory, RefineError> {
    cfg.validate()?;
    let (ow, oh) = (ctx.observation.width(), ctx.observation.height());
    if ow != ctx.intrinsics.width || oh != ctx.intrinsics.height {
        return Err(RefineError::DimensionMismatch(
            ow,
            oh,
            ctx.intrinsics.width,
            ctx.intrinsics.height,
        ));
    }

    let provider_err = |iteration| move |source| RefineError::Provider { iteration, source };
    let mut state = *init;
    let mut loss = provider.discrepancy(&state, ctx).map_err(provider_err(0))?;
    let mut entries = vec![TrajectoryEntry {
        iteration: 0,
        state,
        loss,
        clamped: false,
    }];

    let termination = loop {
        let iteration = entries.len() - 1;
        if loss <= cfg.stop_loss {
            break Termination::ConvergedByLoss;
        }
        if iteration >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        let dq = provider
            .propose_update(&state, ctx)
            .map_err(provider_err(iteration))?;
        if !dq.is_finite() {
            return Err(RefineError::Update {
                iteration,
                source: UpdateError::NonFiniteUpdate,
            });
        }
        if dq.norm() < cfg.stop_update_norm {
            break Termination::ConvergedByUpdate;
        }

        let mut accepted = None;
        for attempt in 0..=MAX_DAMPED_RETRIES {
            let step = if attempt == 0 {
                dq
            } else {
                provider
                    .damped_update(&state, ctx, &dq, attempt)
                    .map_err(provider_err(iteration))?
            };
            let applied = apply_update(&state, &step, &cfg.bounds)
                .map_err(|source| RefineError::Update { iteration, source })?;
            // A candidate the provider cannot score counts as a rejected step.
            if let Ok(candidate_loss) = provider.discrepancy(&applied.state, ctx) {
                if candidate_loss <= loss {
                    accepted = Some((applied, candidate_loss));
                    break;
                }
            }
        }
        let Some((applied, candidate_loss)) = accepted else {
            break Termination::ConvergedByUpdate;
        };
        state = applied.state;
        loss = candidate_loss;
        entries.push(TrajectoryEntry {
            iteration: iteration + 1,
            state,
            loss,
            clamped: applied.clamped,
        });
    };

    Ok(RefinementTrajectory {
        entries,
        termination,
    })
}
