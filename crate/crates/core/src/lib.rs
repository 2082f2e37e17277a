//! Fusional indoor localization with Wi-Fi fingerprints and image keypoints,
//! plus location-based pose estimation for AR display.
//!
//! Positioning runs in two stages: a Wi-Fi fingerprint picks the subarea,
//! then keypoint retrieval inside that subarea picks the reference point,
//! with the distance ratio compensating for differing shooting distances.
//! The [`pose`] module turns the localized RP and a heading into an eye pose,
//! a view frustum and per-object local coordinates.

pub mod cluster;
pub mod db;
pub mod error;
pub mod fingerprint;
pub mod geometry;
pub mod map;
pub mod pipeline;
pub mod pose;
pub mod synth;
pub mod vision;

pub use cluster::{build_subareas, locate_subarea, ClusterConfig};
pub use error::{Error, Result};
pub use fingerprint::Fingerprint;
pub use geometry::Vec3;
pub use map::{make_grid_map, IndoorMap, ReferencePoint, Subarea, VirtualObject};
pub use pipeline::{LocalizationResult, Locator, Method, MetricsReport, Query};
pub use pose::{EyePose, LocalPose, PoseConfig, ViewFrustum};
pub use vision::{Keypoint, KeypointSet, MatchConfig};
