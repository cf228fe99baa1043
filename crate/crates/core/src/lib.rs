//! Court-plane multi-object tracking for basketball video.
//!
//! Detections are projected onto the court through a planar homography and
//! associated frame by frame with a constant-velocity Kalman filter. On top
//! of that sit three game-specific stages: the player set is frozen to the
//! ten longest tracks, long-lost players are re-acquired by appearance and
//! distance, and identity swaps after occlusions are corrected with
//! appearance (different teams) or motion (same team) evidence.
//!
//! The numeric core is generic over [`scalar::Real`] (`f32` or `f64`). The
//! aliases at the crate root fix it to `f64`, which the simulator, file I/O
//! and pipeline use.

pub mod appearance;
pub mod assignment;
pub mod association;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod occlusion;
pub mod pipeline;
pub mod plot;
pub mod scalar;
pub mod simgen;
pub mod tracker;

/// Frame index as it appears in MOTChallenge files (1-based by convention).
pub type Frame = u32;
pub type TrackId = u64;

pub use scalar::Real;

pub type BBox = geometry::BBox<f64>;
pub type CourtPoint = geometry::CourtPoint<f64>;
pub type ImagePoint = geometry::ImagePoint<f64>;
pub type Homography = geometry::Homography<f64>;
pub type Correspondence = geometry::Correspondence<f64>;
pub type Embedding = appearance::Embedding<f64>;
pub type Detection = association::Detection<f64>;
pub type KalmanConfig = motion::KalmanConfig<f64>;
pub type KinematicState = motion::KinematicState<f64>;
pub type CostMatrix = assignment::CostMatrix<f64>;
pub type TrackerConfig = tracker::TrackerConfig<f64>;
pub type Tracker = tracker::Tracker<f64>;
pub type TrackRow = tracker::TrackRow<f64>;
pub type OcclusionEvent = occlusion::OcclusionEvent<f64>;

pub type Tracker32 = tracker::Tracker<f32>;
pub type TrackerConfig32 = tracker::TrackerConfig<f32>;
pub type Homography32 = geometry::Homography<f32>;
