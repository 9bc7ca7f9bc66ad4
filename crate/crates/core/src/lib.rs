//! Offline correction of 3D box annotations for moving objects.
//!
//! Active sensors such as rotating LiDARs capture an object at many instants
//! within one sweep. Boxes fitted to such data without accounting for the
//! object's own motion end up displaced along the direction of travel. This
//! crate estimates, per track, the pose and CTRA dynamics of every box so
//! that the motion-compensated detections fit the boxes tightly while the
//! trajectory stays physically plausible.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the thread
//! pool and the command line live in the `annofix` companion crate.

#![no_std]
// `!(a <= b)` is used on purpose to reject NaN; 6×6 matrix loops index two ways.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod association;
pub mod geometry;
pub mod metrics;
pub mod motion;
pub mod objective;
pub mod optimizer;
pub mod pipeline;
pub mod scene;
pub mod stats;
pub mod synth;

pub use association::{associate, AssociatedCloud, AssociationError, InflationParams};
pub use geometry::{BoxAnnotation, BoxDims, NormalizedBoxCoords, Pose2};
pub use motion::{compensate_point, ctra_predict, ctra_residual, TrackState};
pub use objective::{ObjectiveConfig, SampleObservation, TrackVariables};
pub use optimizer::{SearchBounds, SearchConfig};
pub use pipeline::{correct_scene, CorrectionResult, Dynamics, SkipReason, TrackDiagnostics};
pub use scene::{Scene, SceneError, SceneMetadata, TimedPoint};
