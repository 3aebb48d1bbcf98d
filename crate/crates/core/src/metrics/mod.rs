//! Per-instruction tracking metrics and their instruction-averaged aggregates.
//!
//! Each instruction is scored on its own: CLEAR-style correspondences give
//! TP/FP/FN and identity switches, a global identity assignment gives IDF1.
//! The aggregates average the per-instruction values, with MOTA clamped at
//! zero before averaging:
//!
//! ```text
//! RIDF1 = mean(IDF1_i)      RMOTA = mean(max(MOTA_i, 0))
//! RRcll = mean(TP/(TP+FN))  RPrcn = mean(TP/(TP+FP))
//! ```

mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::assignment::{min_cost_assignment, CostMatrix};
use crate::difficulty::Level;
use crate::geometry::{iou, BoundingBox};
use crate::ingest::GtRecord;
use crate::tracker::Trajectory;

pub use report::render_text;

/// IoU at which a predicted box counts as covering a ground-truth box.
pub const DEFAULT_TP_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("duplicate box for id {id} at frame {frame}")]
    Duplicate { frame: usize, id: u64 },
    #[error("frame {0} is not in the task's frame listing")]
    UnknownFrame(String),
    #[error("tp iou threshold {0} must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("no ground truth boxes; MOTA is undefined")]
    NoGroundTruth,
    #[error("no evaluable instructions")]
    NoEvaluable,
}

/// Boxes with ids, grouped by frame index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequence {
    frames: BTreeMap<usize, BTreeMap<u64, BoundingBox>>,
}

impl Sequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: usize, id: u64, bbox: BoundingBox) -> Result<(), MetricsError> {
        if self.frames.entry(frame).or_default().insert(id, bbox).is_some() {
            return Err(MetricsError::Duplicate { frame, id });
        }
        Ok(())
    }

    /// Index records by their frame name's position in the task listing.
    pub fn from_records(records: &[GtRecord], frame_index: &HashMap<String, usize>) -> Result<Self, MetricsError> {
        let mut seq = Self::new();
        for r in records {
            let frame = *frame_index
                .get(&r.frame_name)
                .ok_or_else(|| MetricsError::UnknownFrame(r.frame_name.clone()))?;
            seq.insert(frame, r.object_id, r.bbox)?;
        }
        Ok(seq)
    }

    pub fn from_trajectories(tracks: &[Trajectory]) -> Result<Self, MetricsError> {
        let mut seq = Self::new();
        for t in tracks {
            for (f, b) in t.output_boxes() {
                seq.insert(f, t.track_id(), b)?;
            }
        }
        Ok(seq)
    }

    /// Only the frames inside `range`.
    pub fn restrict(&self, range: Range<usize>) -> Sequence {
        Sequence {
            frames: self
                .frames
                .range(range)
                .map(|(&f, boxes)| (f, boxes.clone()))
                .collect(),
        }
    }

    pub fn frame(&self, frame: usize) -> Option<&BTreeMap<u64, BoundingBox>> {
        self.frames.get(&frame)
    }

    pub fn frame_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.frames.keys().copied()
    }

    pub fn box_count(&self) -> usize {
        self.frames.values().map(BTreeMap::len).sum()
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.frames.values().flat_map(|m| m.keys().copied()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.box_count() == 0
    }

    /// Same boxes with ids passed through `relabel`.
    pub fn map_ids(&self, mut relabel: impl FnMut(u64) -> u64) -> Result<Sequence, MetricsError> {
        let mut out = Sequence::new();
        for (&f, boxes) in &self.frames {
            for (&id, &b) in boxes {
                out.insert(f, relabel(id), b)?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct InstructionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub idsw: usize,
    pub gt: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// `(gt_id, pred_id)` correspondences of one frame, sorted by gt id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameMatch {
    pub frame: usize,
    pub pairs: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ClearEvents {
    pub frames: Vec<FrameMatch>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub gt: usize,
}

fn check_threshold(tp_iou: f64) -> Result<(), MetricsError> {
    if tp_iou > 0.0 && tp_iou <= 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidThreshold(tp_iou))
    }
}

/// Frame-by-frame correspondence between ground truth and predictions.
///
/// Pairs matched at the immediately preceding frame are kept while their IoU
/// stays at or above `tp_iou`. The remaining boxes are matched to maximize
/// total IoU over pairs at or above `tp_iou`. An identity switch is counted
/// when a gt id is matched to a different prediction id than at its previous
/// matched frame.
pub fn match_frames(gt: &Sequence, pred: &Sequence, tp_iou: f64) -> Result<ClearEvents, MetricsError> {
    check_threshold(tp_iou)?;
    let empty = BTreeMap::new();
    let frames: BTreeSet<usize> = gt.frame_indices().chain(pred.frame_indices()).collect();
    let mut out = ClearEvents::default();
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let mut previous: Option<FrameMatch> = None;

    for f in frames {
        let g = gt.frame(f).unwrap_or(&empty);
        let p = pred.frame(f).unwrap_or(&empty);
        let mut pairs: Vec<(u64, u64)> = Vec::new();

        if let Some(prev) = previous.as_ref().filter(|prev| prev.frame + 1 == f) {
            for &(gid, pid) in &prev.pairs {
                if let (Some(gb), Some(pb)) = (g.get(&gid), p.get(&pid)) {
                    if iou(gb, pb) >= tp_iou {
                        pairs.push((gid, pid));
                    }
                }
            }
        }

        let g_rest: Vec<(u64, &BoundingBox)> = g
            .iter()
            .filter(|(id, _)| !pairs.iter().any(|pr| pr.0 == **id))
            .map(|(&id, b)| (id, b))
            .collect();
        let p_rest: Vec<(u64, &BoundingBox)> = p
            .iter()
            .filter(|(id, _)| !pairs.iter().any(|pr| pr.1 == **id))
            .map(|(&id, b)| (id, b))
            .collect();
        if !g_rest.is_empty() && !p_rest.is_empty() {
            let mut cost = CostMatrix::filled(g_rest.len(), p_rest.len(), 1.0);
            for (i, (_, gb)) in g_rest.iter().enumerate() {
                for (j, (_, pb)) in p_rest.iter().enumerate() {
                    let v = iou(gb, pb);
                    if v >= tp_iou {
                        cost.set(i, j, 1.0 - v);
                    }
                }
            }
            let assignment = min_cost_assignment(&cost, 1.0).expect("finite costs");
            for (i, j) in assignment.pairs() {
                if iou(g_rest[i].1, p_rest[j].1) >= tp_iou {
                    pairs.push((g_rest[i].0, p_rest[j].0));
                }
            }
        }
        pairs.sort_unstable();

        for &(gid, pid) in &pairs {
            if let Some(prev_pid) = last_match.insert(gid, pid) {
                if prev_pid != pid {
                    out.idsw += 1;
                }
            }
        }
        out.tp += pairs.len();
        out.fn_ += g.len() - pairs.len();
        out.fp += p.len() - pairs.len();
        out.gt += g.len();
        let fm = FrameMatch { frame: f, pairs };
        out.frames.push(fm.clone());
        previous = Some(fm);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityScore {
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub idf1: f64,
}

/// Identity F1 under the one-to-one gt-id/prediction-id assignment that
/// maximizes the number of co-located frames (IoU at or above `tp_iou`).
pub fn idf1(gt: &Sequence, pred: &Sequence, tp_iou: f64) -> Result<IdentityScore, MetricsError> {
    check_threshold(tp_iou)?;
    let gt_ids: Vec<u64> = gt.ids().into_iter().collect();
    let pred_ids: Vec<u64> = pred.ids().into_iter().collect();
    let gi: HashMap<u64, usize> = gt_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let pi: HashMap<u64, usize> = pred_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut coloc = vec![0usize; gt_ids.len() * pred_ids.len()];
    for f in gt.frame_indices() {
        let (Some(g), Some(p)) = (gt.frame(f), pred.frame(f)) else {
            continue;
        };
        for (gid, gb) in g {
            for (pid, pb) in p {
                if iou(gb, pb) >= tp_iou {
                    coloc[gi[gid] * pred_ids.len() + pi[pid]] += 1;
                }
            }
        }
    }

    let mut idtp = 0usize;
    if !gt_ids.is_empty() && !pred_ids.is_empty() {
        let cost = CostMatrix::from_vec(
            gt_ids.len(),
            pred_ids.len(),
            coloc.iter().map(|&c| -(c as f64)).collect(),
        )
        .expect("shape matches");
        let assignment = min_cost_assignment(&cost, 0.0).expect("finite costs");
        idtp = assignment.pairs().map(|(r, c)| coloc[r * pred_ids.len() + c]).sum();
    }
    let idfn = gt.box_count() - idtp;
    let idfp = pred.box_count() - idtp;
    let denom = 2 * idtp + idfp + idfn;
    let idf1 = if denom == 0 {
        0.0
    } else {
        (2 * idtp) as f64 / denom as f64
    };
    Ok(IdentityScore { idtp, idfp, idfn, idf1 })
}

/// `1 - (FN + FP + IDSW) / GT`, unclamped.
pub fn mota(counts: &InstructionCounts) -> Result<f64, MetricsError> {
    if counts.gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    Ok(1.0 - (counts.fn_ + counts.fp + counts.idsw) as f64 / counts.gt as f64)
}

pub fn recall(counts: &InstructionCounts) -> Result<f64, MetricsError> {
    if counts.gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    Ok(counts.tp as f64 / (counts.tp + counts.fn_) as f64)
}

/// `TP / (TP + FP)`; an empty prediction scores 0.
pub fn precision(counts: &InstructionCounts) -> f64 {
    if counts.tp + counts.fp == 0 {
        0.0
    } else {
        counts.tp as f64 / (counts.tp + counts.fp) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstructionResult {
    pub task_id: String,
    pub level: Option<Level>,
    pub idf1: f64,
    pub mota_raw: f64,
    pub mota_clamped: f64,
    pub recall: f64,
    pub precision: f64,
    pub counts: InstructionCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstructionOutcome {
    Evaluated(InstructionResult),
    /// No ground truth in the evaluated segment.
    Excluded { task_id: String, level: Option<Level> },
}

/// Score one instruction. Instructions without ground truth are excluded
/// rather than scored.
pub fn evaluate(
    task_id: &str,
    level: Option<Level>,
    gt: &Sequence,
    pred: &Sequence,
    tp_iou: f64,
) -> Result<InstructionOutcome, MetricsError> {
    check_threshold(tp_iou)?;
    if gt.is_empty() {
        return Ok(InstructionOutcome::Excluded {
            task_id: task_id.to_string(),
            level,
        });
    }
    let clear = match_frames(gt, pred, tp_iou)?;
    let ident = idf1(gt, pred, tp_iou)?;
    let counts = InstructionCounts {
        tp: clear.tp,
        fp: clear.fp,
        fn_: clear.fn_,
        idsw: clear.idsw,
        gt: clear.gt,
        idtp: ident.idtp,
        idfp: ident.idfp,
        idfn: ident.idfn,
    };
    let mota_raw = mota(&counts)?;
    Ok(InstructionOutcome::Evaluated(InstructionResult {
        task_id: task_id.to_string(),
        level,
        idf1: ident.idf1,
        mota_raw,
        mota_clamped: mota_raw.max(0.0),
        recall: recall(&counts)?,
        precision: precision(&counts),
        counts,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    /// `None` for the all-instruction group.
    pub level: Option<Level>,
    pub n: usize,
    pub ridf1: f64,
    pub rmota: f64,
    pub rrcll: f64,
    pub rprcn: f64,
}

impl Aggregate {
    fn over<'a>(level: Option<Level>, results: impl Iterator<Item = &'a InstructionResult>) -> Option<Self> {
        let (mut n, mut idf1, mut mota, mut rcll, mut prcn) = (0usize, 0.0, 0.0, 0.0, 0.0);
        for r in results {
            n += 1;
            idf1 += r.idf1;
            mota += r.mota_clamped;
            rcll += r.recall;
            prcn += r.precision;
        }
        (n > 0).then(|| {
            let k = n as f64;
            Aggregate {
                level,
                n,
                ridf1: idf1 / k,
                rmota: mota / k,
                rrcll: rcll / k,
                rprcn: prcn / k,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedInstruction {
    pub task_id: String,
    pub level: Option<Level>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tp_iou: f64,
    /// How an instruction with no predicted boxes is scored for precision.
    pub empty_precision: f64,
    pub instructions: Vec<InstructionResult>,
    pub excluded: Vec<ExcludedInstruction>,
    pub overall: Aggregate,
    /// Per-level groups in easy, medium, hard order; levels with no
    /// instructions are omitted.
    pub by_level: Vec<Aggregate>,
}

/// Average per-instruction results overall and per level.
pub fn aggregate(outcomes: Vec<InstructionOutcome>, tp_iou: f64) -> Result<MetricsReport, MetricsError> {
    let mut instructions = Vec::new();
    let mut excluded = Vec::new();
    for o in outcomes {
        match o {
            InstructionOutcome::Evaluated(r) => instructions.push(r),
            InstructionOutcome::Excluded { task_id, level } => excluded.push(ExcludedInstruction {
                task_id,
                level,
                reason: "no ground truth in evaluated frames".into(),
            }),
        }
    }
    let overall = Aggregate::over(None, instructions.iter()).ok_or(MetricsError::NoEvaluable)?;
    let by_level = Level::ALL
        .into_iter()
        .filter_map(|lv| Aggregate::over(Some(lv), instructions.iter().filter(|r| r.level == Some(lv))))
        .collect();
    Ok(MetricsReport {
        tp_iou,
        empty_precision: 0.0,
        instructions,
        excluded,
        overall,
        by_level,
    })
}
