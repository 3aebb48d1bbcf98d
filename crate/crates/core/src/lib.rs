//! Toolkit for reasoning-instruction multi-object tracking.
//!
//! The tracking side runs an online tracker over a stream of per-frame
//! detections: live trajectories are propagated into the current frame,
//! associated to detections by IoU with an optimal assignment, and then
//! updated, spawned or aged out. The evaluation side scores each instruction
//! with CLEAR-style counts and identity F1, and averages them per instruction
//! into RIDF1, RMOTA (clamped at zero), RRcll and RPrcn.
//!
//! Model-dependent stages stay outside the process: detections arrive as a
//! line-delimited stream and box propagation can be delegated to a child
//! process over a small JSON protocol.

pub mod assignment;
pub mod difficulty;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod synth;
pub mod tracker;

pub use assignment::{build_cost_matrix, solve, AssignmentResult, CostMatrix};
pub use difficulty::{AttributeTag, Category, DifficultyResult, Level};
pub use geometry::{iou, mask_to_box, BinaryMask, BoundingBox};
pub use ingest::{DetectionStream, GtRecord, InstructionTask};
pub use tracker::{Tracker, TrackerConfig, Trajectory};
