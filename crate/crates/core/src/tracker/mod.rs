//! Online tracking: propagate live trajectories, associate detections by IoU,
//! then apply the trajectory update rule.
//!
//! The update rule per frame `F_c`:
//! - matched trajectories commit the detection box and set `F(T) = F_c`;
//! - every unmatched detection starts a new trajectory at `F_c`;
//! - an unmatched trajectory survives iff `F_c - F(T) <= max_age`, keeping
//!   its old `F(T)`.
//!
//! Propagated boxes drive association only. They are written to the output
//! solely in the opt-in `emit_propagated` mode, and even then are kept apart
//! from the committed boxes.

mod external;
mod propagator;

use std::collections::BTreeMap;
use std::time::Duration;

use log::{debug, warn};
use thiserror::Error;

use crate::assignment::{build_cost_matrix, solve, AssignmentError};
use crate::geometry::BoundingBox;
use crate::ingest::{Detection, DetectionStream};

pub use external::{ExternalPropagator, Hello, PredictRequest, PredictResponse, PROTOCOL_VERSION};
pub use propagator::{ConstantVelocity, FrameContext, Persistence, Propagator, PropagatorError, PropagatorKind};

/// Maximum trajectory age used in the reference configuration.
pub const DEFAULT_MAX_AGE: u32 = 10;
pub const DEFAULT_IOU_GATE: f64 = 0.3;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("frame {frame} stepped after frame {last}; frames must strictly increase")]
    OutOfOrder { frame: usize, last: usize },
    #[error("detection for frame {found} passed to step for frame {expected}")]
    DetectionFrame { expected: usize, found: usize },
    #[error("detection stream reaches frame {last} but the task has {n_frames} frames")]
    StreamOutOfRange { last: usize, n_frames: usize },
    #[error("invalid tracker config: {0}")]
    Config(String),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

/// An identity-carrying track.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    track_id: u64,
    first_frame: usize,
    first_box: BoundingBox,
    committed: BTreeMap<usize, BoundingBox>,
    last_matched_frame: usize,
    last_matched_box: BoundingBox,
    propagated: BTreeMap<usize, BoundingBox>,
}

impl Trajectory {
    pub fn new(track_id: u64, frame: usize, bbox: BoundingBox) -> Self {
        Self {
            track_id,
            first_frame: frame,
            first_box: bbox,
            committed: BTreeMap::from([(frame, bbox)]),
            last_matched_frame: frame,
            last_matched_box: bbox,
            propagated: BTreeMap::new(),
        }
    }

    pub fn track_id(&self) -> u64 {
        self.track_id
    }

    pub fn first_frame(&self) -> usize {
        self.first_frame
    }

    pub fn first_box(&self) -> BoundingBox {
        self.first_box
    }

    /// Boxes at creation and match frames, keyed by frame index.
    pub fn committed(&self) -> &BTreeMap<usize, BoundingBox> {
        &self.committed
    }

    /// `F(T)`: the latest frame at which this trajectory was matched.
    pub fn last_matched_frame(&self) -> usize {
        self.last_matched_frame
    }

    pub fn last_matched_box(&self) -> BoundingBox {
        self.last_matched_box
    }

    /// Predictions recorded in `emit_propagated` mode; empty otherwise.
    pub fn propagated(&self) -> &BTreeMap<usize, BoundingBox> {
        &self.propagated
    }

    /// Frames since the last match.
    pub fn age(&self, current_frame: usize) -> usize {
        current_frame.saturating_sub(self.last_matched_frame)
    }

    /// Committed boxes merged with any recorded predictions.
    pub fn output_boxes(&self) -> BTreeMap<usize, BoundingBox> {
        let mut out = self.propagated.clone();
        out.extend(self.committed.iter().map(|(&f, &b)| (f, b)));
        out
    }

    pub(crate) fn commit(&mut self, frame: usize, bbox: BoundingBox) {
        debug_assert!(frame > self.last_matched_frame);
        self.committed.insert(frame, bbox);
        self.last_matched_frame = frame;
        self.last_matched_box = bbox;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// `A_t`: an unmatched trajectory is dropped once `F_c - F(T)` exceeds this.
    pub max_age: u32,
    pub iou_gate: f64,
    pub propagator: PropagatorKind,
    /// Per-request deadline for external propagators.
    pub propagator_timeout: Duration,
    /// Record propagated boxes of unmatched trajectories for output.
    pub emit_propagated: bool,
    /// Drop detections scoring below this. Unscored detections always pass.
    pub min_score: Option<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            max_age: DEFAULT_MAX_AGE,
            iou_gate: DEFAULT_IOU_GATE,
            propagator: PropagatorKind::Persistence,
            propagator_timeout: Duration::from_secs(30),
            emit_propagated: false,
            min_score: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.max_age < 1 {
            return Err(TrackerError::Config("max age must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_gate) {
            return Err(TrackerError::Config(format!("iou gate {} is outside [0, 1]", self.iou_gate)));
        }
        if let Some(s) = self.min_score {
            if !(0.0..=1.0).contains(&s) {
                return Err(TrackerError::Config(format!("min score {s} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Result of one trajectory update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateOutcome {
    /// Surviving trajectories, ordered by track id.
    pub live: Vec<Trajectory>,
    /// Trajectories dropped at this frame.
    pub deleted: Vec<Trajectory>,
    pub matched: usize,
    pub created: usize,
    pub retained: usize,
}

/// Apply the update rule at frame `current_frame`.
///
/// New ids are drawn from `next_id` in detection order.
pub fn trajectory_update(
    matched: Vec<(Trajectory, BoundingBox)>,
    unmatched_tracks: Vec<Trajectory>,
    unmatched_detections: Vec<BoundingBox>,
    current_frame: usize,
    max_age: u32,
    next_id: &mut u64,
) -> UpdateOutcome {
    let mut out = UpdateOutcome::default();
    for (mut t, bbox) in matched {
        t.commit(current_frame, bbox);
        out.live.push(t);
        out.matched += 1;
    }
    for bbox in unmatched_detections {
        out.live.push(Trajectory::new(*next_id, current_frame, bbox));
        *next_id += 1;
        out.created += 1;
    }
    for t in unmatched_tracks {
        if t.age(current_frame) <= max_age as usize {
            out.live.push(t);
            out.retained += 1;
        } else {
            out.deleted.push(t);
        }
    }
    out.live.sort_by_key(Trajectory::track_id);
    out
}

/// Counters for one tracker step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepReport {
    pub frame: usize,
    pub matched: usize,
    pub created: usize,
    pub retained: usize,
    pub deleted: usize,
    /// Detections dropped before association (zero area or low score).
    pub rejected: usize,
    /// Predictions that fell back to the last matched box.
    pub fallbacks: usize,
}

pub struct Tracker {
    config: TrackerConfig,
    propagator: Box<dyn Propagator>,
    frame_paths: Vec<String>,
    live: Vec<Trajectory>,
    finished: Vec<Trajectory>,
    next_id: u64,
    last_frame: Option<usize>,
}

impl Tracker {
    /// Build a tracker with the propagator named in `config`.
    pub fn new(config: TrackerConfig, frame_paths: Vec<String>) -> Result<Self, TrackerError> {
        config.validate()?;
        let propagator = config.propagator.build(config.propagator_timeout)?;
        Self::with_propagator(config, propagator, frame_paths)
    }

    pub fn with_propagator(
        config: TrackerConfig,
        propagator: Box<dyn Propagator>,
        frame_paths: Vec<String>,
    ) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Self {
            config,
            propagator,
            frame_paths,
            live: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn live(&self) -> &[Trajectory] {
        &self.live
    }

    fn predict_all(&mut self, frame: usize) -> (Vec<BoundingBox>, usize) {
        let mut fallbacks = 0;
        let current = self
            .frame_paths
            .get(frame)
            .cloned()
            .unwrap_or_else(|| frame.to_string());
        let mut predictions = Vec::with_capacity(self.live.len());
        for t in &self.live {
            let history: &[String] = self
                .frame_paths
                .get(t.first_frame()..frame.min(self.frame_paths.len()))
                .unwrap_or(&[]);
            let ctx = FrameContext {
                history,
                current: &current,
            };
            let predicted = match self.propagator.predict(t, frame, &ctx) {
                Ok(Some(b)) => b,
                Ok(None) => {
                    fallbacks += 1;
                    t.last_matched_box()
                }
                Err(e) => {
                    warn!("track {} frame {frame}: {e}; using last matched box", t.track_id());
                    fallbacks += 1;
                    t.last_matched_box()
                }
            };
            predictions.push(predicted);
        }
        (predictions, fallbacks)
    }

    /// Process one frame. `frame` must exceed every earlier stepped frame and
    /// all detections must belong to it.
    pub fn step(&mut self, frame: usize, detections: &[Detection]) -> Result<StepReport, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackerError::OutOfOrder { frame, last });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame_index != frame) {
            return Err(TrackerError::DetectionFrame {
                expected: frame,
                found: d.frame_index,
            });
        }
        self.last_frame = Some(frame);

        let min_score = self.config.min_score;
        let boxes: Vec<BoundingBox> = detections
            .iter()
            .filter(|d| d.bbox.area() > 0.0)
            .filter(|d| match (min_score, d.score) {
                (Some(min), Some(s)) => s >= min,
                _ => true,
            })
            .map(|d| d.bbox)
            .collect();
        let rejected = detections.len() - boxes.len();

        let (predictions, fallbacks) = self.predict_all(frame);
        let cost = build_cost_matrix(&boxes, &predictions);
        let assoc = solve(&cost, self.config.iou_gate)?;

        let mut slots: Vec<Option<Trajectory>> = std::mem::take(&mut self.live).into_iter().map(Some).collect();
        let matched: Vec<(Trajectory, BoundingBox)> = assoc
            .matches
            .iter()
            .map(|&(d, t, _)| (slots[t].take().expect("track matched once"), boxes[d]))
            .collect();
        let mut unmatched_tracks: Vec<Trajectory> = Vec::with_capacity(assoc.unmatched_tracks.len());
        for &t in &assoc.unmatched_tracks {
            let mut traj = slots[t].take().expect("track listed once");
            if self.config.emit_propagated && traj.age(frame) <= self.config.max_age as usize {
                traj.propagated.insert(frame, predictions[t]);
            }
            unmatched_tracks.push(traj);
        }
        let unmatched_detections: Vec<BoundingBox> = assoc.unmatched_detections.iter().map(|&d| boxes[d]).collect();

        let outcome = trajectory_update(
            matched,
            unmatched_tracks,
            unmatched_detections,
            frame,
            self.config.max_age,
            &mut self.next_id,
        );
        let report = StepReport {
            frame,
            matched: outcome.matched,
            created: outcome.created,
            retained: outcome.retained,
            deleted: outcome.deleted.len(),
            rejected,
            fallbacks,
        };
        debug!("{report:?}");
        self.live = outcome.live;
        self.finished.extend(outcome.deleted);
        Ok(report)
    }

    /// All trajectories seen so far, live and deleted, ordered by track id.
    pub fn finish(self) -> Vec<Trajectory> {
        let mut all = self.finished;
        all.extend(self.live);
        all.sort_by_key(Trajectory::track_id);
        all
    }
}

/// Totals over a full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub frames: usize,
    pub detections: usize,
    pub rejected: usize,
    pub fallbacks: usize,
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    pub trajectories: Vec<Trajectory>,
    pub stats: RunStats,
}

/// Drive a tracker over every frame of a task. Frames missing from the stream
/// are stepped with no detections.
pub fn run(frame_paths: &[String], stream: &DetectionStream, config: &TrackerConfig) -> Result<TrackingRun, TrackerError> {
    let propagator = config.propagator.build(config.propagator_timeout)?;
    run_with(frame_paths, stream, config, propagator)
}

pub fn run_with(
    frame_paths: &[String],
    stream: &DetectionStream,
    config: &TrackerConfig,
    propagator: Box<dyn Propagator>,
) -> Result<TrackingRun, TrackerError> {
    let n_frames = frame_paths.len();
    if let Some(last) = stream.last_frame() {
        if last >= n_frames {
            return Err(TrackerError::StreamOutOfRange { last, n_frames });
        }
    }
    let mut tracker = Tracker::with_propagator(config.clone(), propagator, frame_paths.to_vec())?;
    let mut stats = RunStats {
        frames: n_frames,
        ..Default::default()
    };
    for frame in 0..n_frames {
        let dets = stream.get(frame).map_or(&[][..], |f| &f.detections[..]);
        stats.detections += dets.len();
        let report = tracker.step(frame, dets)?;
        stats.rejected += report.rejected;
        stats.fallbacks += report.fallbacks;
    }
    let trajectories = tracker.finish();
    stats.trajectories = trajectories.len();
    Ok(TrackingRun { trajectories, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn det(frame: usize, b: BoundingBox) -> Detection {
        Detection {
            frame_index: frame,
            bbox: b,
            score: None,
        }
    }

    fn tracker() -> Tracker {
        Tracker::new(TrackerConfig::default(), Vec::new()).unwrap()
    }

    #[test]
    fn empty_state_spawns_tracks() {
        let mut t = tracker();
        let r = t
            .step(4, &[det(4, bb(0.0, 0.0, 10.0, 10.0)), det(4, bb(50.0, 50.0, 60.0, 60.0))])
            .unwrap();
        assert_eq!(r.created, 2);
        let ids: Vec<u64> = t.live().iter().map(Trajectory::track_id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert!(t.live().iter().all(|x| x.first_frame() == 4));
    }

    #[test]
    fn single_pair_matches() {
        let mut t = tracker();
        t.step(0, &[det(0, bb(0.0, 0.0, 10.0, 10.0))]).unwrap();
        // iou([0,0,10,10],[0,0,10,11.111..]) = 0.9
        let r = t.step(1, &[det(1, bb(0.0, 0.0, 10.0, 100.0 / 9.0))]).unwrap();
        assert_eq!(r.matched, 1);
        assert_eq!(t.live()[0].last_matched_frame(), 1);
        assert_eq!(t.live()[0].committed().len(), 2);
    }

    #[test]
    fn unmatched_track_expires_after_max_age() {
        let mut t = tracker();
        t.step(0, &[det(0, bb(0.0, 0.0, 10.0, 10.0))]).unwrap();
        t.step(10, &[]).unwrap();
        assert_eq!(t.live().len(), 1);
        t.step(11, &[]).unwrap();
        assert!(t.live().is_empty());
        let all = t.finish();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].committed().keys().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn sequencing_errors() {
        let mut t = tracker();
        t.step(3, &[]).unwrap();
        assert!(matches!(t.step(3, &[]), Err(TrackerError::OutOfOrder { .. })));
        assert!(matches!(
            t.step(4, &[det(5, bb(0.0, 0.0, 1.0, 1.0))]),
            Err(TrackerError::DetectionFrame { .. })
        ));
    }

    #[test]
    fn update_rule_examples() {
        let mut next = 10;
        let t1 = Trajectory::new(1, 2, bb(0.0, 0.0, 1.0, 1.0));
        let out = trajectory_update(vec![(t1, bb(1.0, 1.0, 2.0, 2.0))], vec![], vec![], 7, 10, &mut next);
        assert_eq!(out.live[0].last_matched_frame(), 7);
        assert_eq!(out.live[0].last_matched_box(), bb(1.0, 1.0, 2.0, 2.0));
        assert_eq!(out.live[0].first_frame(), 2);

        let d = bb(3.0, 3.0, 4.0, 4.0);
        let out = trajectory_update(vec![], vec![], vec![d], 7, 10, &mut next);
        assert_eq!(out.live[0].first_frame(), 7);
        assert_eq!(out.live[0].first_box(), d);
        assert_eq!(out.live[0].track_id(), 10);
        assert_eq!(next, 11);

        for (fc, kept) in [(10, true), (11, false), (12, false)] {
            let stale = Trajectory::new(1, 0, d);
            let out = trajectory_update(vec![], vec![stale], vec![], fc, 10, &mut next);
            assert_eq!(out.live.len() == 1, kept, "F_c = {fc}");
            assert_eq!(out.deleted.len() == 1, !kept);
            if kept {
                assert_eq!(out.live[0].last_matched_frame(), 0);
            }
        }
    }

    #[test]
    fn zero_area_and_low_score_detections_rejected() {
        let cfg = TrackerConfig {
            min_score: Some(0.5),
            ..Default::default()
        };
        let mut t = Tracker::new(cfg, Vec::new()).unwrap();
        let dets = [
            det(0, bb(1.0, 1.0, 1.0, 5.0)),
            Detection {
                frame_index: 0,
                bbox: bb(0.0, 0.0, 5.0, 5.0),
                score: Some(0.2),
            },
            Detection {
                frame_index: 0,
                bbox: bb(10.0, 0.0, 15.0, 5.0),
                score: Some(0.9),
            },
        ];
        let r = t.step(0, &dets).unwrap();
        assert_eq!((r.rejected, r.created), (2, 1));
    }

    #[test]
    fn run_single_object_then_absent() {
        let paths: Vec<String> = (0..21).map(|i| format!("{i:06}.jpg")).collect();
        let mut stream = DetectionStream::new();
        for f in 0..5 {
            let x = f as f64;
            stream.push(f, vec![(bb(x, 0.0, x + 10.0, 10.0), None)]).unwrap();
        }
        let out = run(&paths, &stream, &TrackerConfig::default()).unwrap();
        assert_eq!(out.trajectories.len(), 1);
        assert_eq!(
            out.trajectories[0].committed().keys().copied().collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(out.stats.frames, 21);
    }

    #[test]
    fn run_empty_and_out_of_range() {
        let paths: Vec<String> = (0..3).map(|i| format!("{i}.jpg")).collect();
        let out = run(&paths, &DetectionStream::new(), &TrackerConfig::default()).unwrap();
        assert!(out.trajectories.is_empty());
        let mut stream = DetectionStream::new();
        stream.push(3, vec![]).unwrap();
        assert!(matches!(
            run(&paths, &stream, &TrackerConfig::default()),
            Err(TrackerError::StreamOutOfRange { .. })
        ));
    }

    #[test]
    fn emit_propagated_mode_records_predictions_separately() {
        let cfg = TrackerConfig {
            emit_propagated: true,
            propagator: PropagatorKind::ConstantVelocity,
            ..Default::default()
        };
        let mut t = Tracker::new(cfg, Vec::new()).unwrap();
        t.step(0, &[det(0, bb(0.0, 0.0, 10.0, 10.0))]).unwrap();
        t.step(1, &[det(1, bb(1.0, 0.0, 11.0, 10.0))]).unwrap();
        t.step(2, &[]).unwrap();
        let tr = &t.live()[0];
        assert_eq!(tr.committed().len(), 2);
        assert_eq!(tr.propagated().get(&2), Some(&bb(2.0, 0.0, 12.0, 10.0)));
        assert_eq!(tr.output_boxes().len(), 3);
    }

    struct Failing;

    impl Propagator for Failing {
        fn name(&self) -> String {
            "failing".into()
        }

        fn predict(
            &mut self,
            _t: &Trajectory,
            _f: usize,
            _c: &FrameContext<'_>,
        ) -> Result<Option<BoundingBox>, PropagatorError> {
            Err(PropagatorError::Closed)
        }
    }

    #[test]
    fn failing_propagator_degrades_to_persistence() {
        let mut t = Tracker::with_propagator(TrackerConfig::default(), Box::new(Failing), Vec::new()).unwrap();
        t.step(0, &[det(0, bb(0.0, 0.0, 10.0, 10.0))]).unwrap();
        let r = t.step(1, &[det(1, bb(0.0, 0.0, 10.0, 10.0))]).unwrap();
        assert_eq!((r.matched, r.fallbacks), (1, 1));
    }

    #[test]
    fn config_validation() {
        let bad = TrackerConfig {
            max_age: 0,
            ..Default::default()
        };
        assert!(Tracker::new(bad, Vec::new()).is_err());
        let bad = TrackerConfig {
            iou_gate: 1.5,
            ..Default::default()
        };
        assert!(Tracker::new(bad, Vec::new()).is_err());
    }
}
