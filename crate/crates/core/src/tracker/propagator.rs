//! Box propagators: predict where a live trajectory sits in the current frame.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use super::external::ExternalPropagator;
use super::Trajectory;
use crate::geometry::BoundingBox;

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error("failed to start propagator `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("propagator handshake failed: {0}")]
    Handshake(String),
    #[error("propagator i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("propagator did not answer within {0:?}")]
    Timeout(Duration),
    #[error("propagator protocol violation: {0}")]
    Protocol(String),
    #[error("propagator process has exited")]
    Closed,
    #[error("unknown propagator '{0}' (expected persist, velocity or extern:<command>)")]
    UnknownKind(String),
}

/// Frames visible to a propagator for one prediction: the trajectory's
/// earlier frames and the current one. Paths are empty when the tracker runs
/// without a frame listing.
#[derive(Debug, Clone, Copy)]
pub struct FrameContext<'a> {
    pub history: &'a [String],
    pub current: &'a str,
}

/// Predicts a trajectory's box at `current_frame`. Implementations receive the
/// trajectory by shared reference and cannot alter tracker state.
pub trait Propagator: Send {
    fn name(&self) -> String;

    fn predict(
        &mut self,
        trajectory: &Trajectory,
        current_frame: usize,
        context: &FrameContext<'_>,
    ) -> Result<Option<BoundingBox>, PropagatorError>;
}

/// The last matched box, unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl Propagator for Persistence {
    fn name(&self) -> String {
        "persist".into()
    }

    fn predict(
        &mut self,
        trajectory: &Trajectory,
        _current_frame: usize,
        _context: &FrameContext<'_>,
    ) -> Result<Option<BoundingBox>, PropagatorError> {
        Ok(Some(trajectory.last_matched_box()))
    }
}

/// Last box translated by the mean per-frame displacement between the last
/// two committed boxes. Falls back to persistence with a single box.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl ConstantVelocity {
    pub fn extrapolate(trajectory: &Trajectory, current_frame: usize) -> BoundingBox {
        let mut recent = trajectory.committed().iter().rev();
        let (Some((&f2, b2)), Some((&f1, b1))) = (recent.next(), recent.next()) else {
            return trajectory.last_matched_box();
        };
        let span = (f2 - f1) as f64;
        let vx = ((b2.x1() - b1.x1()) + (b2.x2() - b1.x2())) * 0.5 / span;
        let vy = ((b2.y1() - b1.y1()) + (b2.y2() - b1.y2())) * 0.5 / span;
        let ahead = current_frame.saturating_sub(f2) as f64;
        b2.translate(vx * ahead, vy * ahead).unwrap_or(*b2)
    }
}

impl Propagator for ConstantVelocity {
    fn name(&self) -> String {
        "velocity".into()
    }

    fn predict(
        &mut self,
        trajectory: &Trajectory,
        current_frame: usize,
        _context: &FrameContext<'_>,
    ) -> Result<Option<BoundingBox>, PropagatorError> {
        Ok(Some(Self::extrapolate(trajectory, current_frame)))
    }
}

/// Propagator selection as written on the command line:
/// `persist`, `velocity` or `extern:<shell command>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropagatorKind {
    Persistence,
    ConstantVelocity,
    External { command: String },
}

impl PropagatorKind {
    pub fn build(&self, timeout: Duration) -> Result<Box<dyn Propagator>, PropagatorError> {
        Ok(match self {
            PropagatorKind::Persistence => Box::new(Persistence),
            PropagatorKind::ConstantVelocity => Box::new(ConstantVelocity),
            PropagatorKind::External { command } => Box::new(ExternalPropagator::spawn(command, timeout)?),
        })
    }
}

impl fmt::Display for PropagatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropagatorKind::Persistence => f.write_str("persist"),
            PropagatorKind::ConstantVelocity => f.write_str("velocity"),
            PropagatorKind::External { command } => write!(f, "extern:{command}"),
        }
    }
}

impl FromStr for PropagatorKind {
    type Err = PropagatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("extern:") {
            let cmd = cmd.trim().trim_matches('"').trim();
            if cmd.is_empty() {
                return Err(PropagatorError::UnknownKind(s.into()));
            }
            return Ok(PropagatorKind::External { command: cmd.into() });
        }
        match s {
            "persist" | "persistence" => Ok(PropagatorKind::Persistence),
            "velocity" | "constant_velocity" | "constant-velocity" => Ok(PropagatorKind::ConstantVelocity),
            _ => Err(PropagatorError::UnknownKind(s.into())),
        }
    }
}
