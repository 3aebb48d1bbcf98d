//! Evaluation glue: task loading, segment selection and suite fan-out.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use log::warn;
use rayon::prelude::*;
use reamot::ingest::{discover_tasks, load_task, load_text, parse_gt, split_frames, InstructionTask};
use reamot::metrics::{evaluate, InstructionOutcome, Sequence};
use serde::Serialize;

use crate::manifest::sha256_hex;

/// Which frames of a task are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub tp_iou: f64,
    pub segment: Segment,
    pub train_fraction: f64,
}

/// One scored task plus digests of what it read.
#[derive(Debug)]
pub struct TaskEval {
    pub task_id: String,
    pub outcome: InstructionOutcome,
    pub gt_digest: String,
    pub pred_digest: String,
}

pub fn evaluate_task(task: &InstructionTask, pred_text: &str, opts: &EvalOptions) -> Result<TaskEval> {
    let pred_records = parse_gt(pred_text).with_context(|| format!("predictions for {}", task.task_id))?;
    let index = task.frame_index();
    let gt = Sequence::from_records(&task.gt, &index).with_context(|| format!("ground truth of {}", task.task_id))?;
    let pred =
        Sequence::from_records(&pred_records, &index).with_context(|| format!("predictions for {}", task.task_id))?;
    let (gt, pred) = match opts.segment {
        Segment::All => (gt, pred),
        Segment::Train | Segment::Test => {
            let split = split_frames(task.frame_paths.len(), opts.train_fraction)?;
            let range = if opts.segment == Segment::Train {
                split.train
            } else {
                split.test
            };
            (gt.restrict(range.clone()), pred.restrict(range))
        }
    };
    let outcome = evaluate(&task.task_id, task.level, &gt, &pred, opts.tp_iou)?;
    Ok(TaskEval {
        task_id: task.task_id.clone(),
        outcome,
        gt_digest: sha256_hex(reamot::ingest::format_gt(&task.gt).as_bytes()),
        pred_digest: sha256_hex(pred_text.as_bytes()),
    })
}

/// A task or prediction left out of a suite evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub task_id: String,
    pub reason: String,
}

/// The prediction file for `task_id`: `<root>/<task_id>.txt`, else
/// `<root>/<task_id>/<name>`.
pub fn find_prediction(root: &Path, task_id: &str, name: &str) -> Option<PathBuf> {
    [root.join(format!("{task_id}.txt")), root.join(task_id).join(name)]
        .into_iter()
        .find(|p| p.is_file())
}

fn prediction_ids(root: &Path, name: &str) -> Result<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    for entry in fs::read_dir(root).with_context(|| format!("reading {}", root.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem() {
                ids.insert(stem.to_string_lossy().into_owned());
            }
        } else if path.join(name).is_file() {
            if let Some(dir) = path.file_name() {
                ids.insert(dir.to_string_lossy().into_owned());
            }
        }
    }
    Ok(ids)
}

pub struct SuiteResult {
    pub evals: Vec<TaskEval>,
    pub skipped: Vec<Skipped>,
}

/// Evaluate every task under `root` against predictions under `pred_root`
/// on up to `jobs` threads. Results are ordered by task id.
pub fn evaluate_suite(root: &Path, pred_root: &Path, pred_name: &str, jobs: usize, opts: &EvalOptions) -> Result<SuiteResult> {
    let dirs = discover_tasks(root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("starting worker threads")?;
    let results: Vec<Result<Option<TaskEval>>> = pool.install(|| {
        dirs.par_iter()
            .map(|dir| {
                let task = load_task(dir)?;
                match find_prediction(pred_root, &task.task_id, pred_name) {
                    Some(path) => Ok(Some(evaluate_task(&task, &load_text(&path)?, opts)?)),
                    None => Ok(None),
                }
            })
            .collect()
    });

    let mut evals = Vec::new();
    let mut skipped = Vec::new();
    let mut gt_ids = BTreeSet::new();
    for (dir, result) in dirs.iter().zip(results) {
        let task_id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        gt_ids.insert(task_id.clone());
        match result? {
            Some(e) => evals.push(e),
            None => {
                warn!("no prediction for task {task_id}; skipped");
                skipped.push(Skipped {
                    task_id,
                    reason: "no prediction file".into(),
                });
            }
        }
    }
    for id in prediction_ids(pred_root, pred_name)? {
        if !gt_ids.contains(&id) {
            warn!("prediction {id} has no matching task; skipped");
            skipped.push(Skipped {
                task_id: id,
                reason: "no matching task".into(),
            });
        }
    }
    evals.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    skipped.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    Ok(SuiteResult { evals, skipped })
}
