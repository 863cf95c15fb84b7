//! LiDAR and aerial image co-registration toolkit.
//!
//! The crate covers the geometric chain from a classified point cloud and a
//! set of oriented frame images to per-point labels:
//!
//! * [`geometry`]: Euler-angle extrinsics, radial and tangential distortion,
//!   world-to-pixel projection and its inverse.
//! * [`depth`]: buffered minimum-depth rasters and depth-consistency visibility.
//! * [`transfer`]: multi-view aggregation of per-pixel class scores onto points.
//! * [`fusion`]: a small MLP fusing image-branch and point-branch scores.
//! * [`eval`]: confusion matrices and IoU, split statistics, submission
//!   archives and cloud-to-cloud distances.
//! * [`flight`]: corridor flight plans over pylon sequences.
//!
//! File formats live in [`npy`], [`ply`] and [`cameras`]; class grouping in
//! [`classes`].
//!
//! The `parallel` feature (on by default) runs per-point work on the rayon
//! pool. Results do not depend on the thread count.

pub mod cameras;
pub mod classes;
pub mod cloud;
pub mod depth;
pub mod error;
pub mod eval;
pub mod flight;
pub mod fusion;
pub mod geometry;
pub mod npy;
pub mod ply;
pub mod transfer;

/// Library version, as recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use classes::{remap_labels, ClassMapping, IGNORE_LABEL, NUM_CLASSES};
pub use cloud::PointCloud;
pub use depth::{render_depth_map, visible_views, DepthMap, VisibilityConfig};
pub use error::{Error, Result};
pub use flight::{plan_trajectory, FlightPlan, FlightPlanConfig, Pylon};
pub use fusion::{fuse_forward, fuse_gradient, train_fusion, FusionModel, TrainConfig};
pub use geometry::{project, Camera, CameraIntrinsics, CameraPose, ProjectionResult, ProjectionStatus};
pub use transfer::{aggregate_logits, transfer, transfer_labels, LogitImage, TransferConfig, ViewWeighting};
