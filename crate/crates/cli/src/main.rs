//! `reamot`: track, evaluate, score difficulty, generate synthetic scenes and
//! split frame ranges.
//!
//! Exit codes: 0 success, 1 internal error, 2 input error, 3 nothing to
//! evaluate.

mod eval;
mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use reamot::difficulty::{read_annotations, score, Annotation, DifficultyError, Level};
use reamot::ingest::{load_task, load_text, read_detections, split_frames, write_tracks, IngestError};
use reamot::metrics::{aggregate, render_text, InstructionOutcome, MetricsError, MetricsReport, DEFAULT_TP_IOU};
use reamot::synth::{corrupt, emit, generate, CorruptionSpec, SceneSpec, SynthError};
use reamot::tracker::{run, PropagatorError, PropagatorKind, TrackerError, DEFAULT_IOU_GATE, DEFAULT_MAX_AGE};
use reamot::{DetectionStream, TrackerConfig, Trajectory};
use serde::Serialize;
use serde_json::json;

use eval::{evaluate_suite, evaluate_task, EvalOptions, Segment, Skipped};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "reamot", version, about = "Reasoning-instruction multi-object tracking toolkit")]
struct Cli {
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the online tracker over one task.
    Track(TrackArgs),
    /// Score one task's predictions.
    Eval(EvalArgs),
    /// Score every task of a benchmark folder.
    EvalSuite(SuiteArgs),
    /// Sum attribute scores and assign difficulty levels.
    Difficulty(DifficultyArgs),
    /// Generate a synthetic task with a corrupted detection stream.
    Synth(SynthArgs),
    /// Print the train/test frame ranges of a sequence.
    Split(SplitArgs),
}

#[derive(Args)]
struct TrackArgs {
    /// Task directory (gt, path listing, description).
    #[arg(long)]
    task: PathBuf,
    /// Line-delimited detection stream.
    #[arg(long, conflicts_with = "detector_cmd", required_unless_present = "detector_cmd")]
    detections: Option<PathBuf>,
    /// Shell command printing a detection stream on stdout. Runs with
    /// REAMOT_TASK_DIR set to the task directory.
    #[arg(long)]
    detector_cmd: Option<String>,
    /// Frames an unmatched trajectory survives.
    #[arg(long, default_value_t = DEFAULT_MAX_AGE)]
    max_age: u32,
    /// Minimum IoU for a detection to continue a trajectory.
    #[arg(long, default_value_t = DEFAULT_IOU_GATE)]
    gate: f64,
    /// persist, velocity or extern:<command>.
    #[arg(long, default_value = "persist")]
    propagator: String,
    /// Seconds to wait for each external propagator answer.
    #[arg(long, default_value_t = 30.0)]
    propagator_timeout: f64,
    /// Also write propagated boxes of unmatched trajectories.
    #[arg(long)]
    emit_propagated: bool,
    /// Drop detections scored below this.
    #[arg(long)]
    min_score: Option<f64>,
    /// Track file, in ground-truth format.
    #[arg(long)]
    out: PathBuf,
    /// Per-frame box and id records for external rendering.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ScoringArgs {
    /// IoU at which a predicted box covers a ground-truth box.
    #[arg(long, default_value_t = DEFAULT_TP_IOU)]
    tp_iou: f64,
    /// Frames to score.
    #[arg(long, value_enum, default_value_t = Segment::All)]
    segment: Segment,
    /// Leading fraction of frames forming the train segment.
    #[arg(long, default_value_t = 0.4)]
    train_fraction: f64,
    /// Machine-readable report.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Text report; always printed to stdout as well.
    #[arg(long)]
    text: Option<PathBuf>,
}

impl ScoringArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            tp_iou: self.tp_iou,
            segment: self.segment,
            train_fraction: self.train_fraction,
        }
    }

    fn config(&self) -> serde_json::Value {
        json!({
            "tp_iou": self.tp_iou,
            "segment": self.segment,
            "train_fraction": self.train_fraction,
            "empty_prediction_precision": 0.0,
        })
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Task directory holding the ground truth.
    #[arg(long)]
    task: PathBuf,
    /// Prediction file in ground-truth format.
    #[arg(long)]
    pred: PathBuf,
    /// Add per-level rows to the aggregate block.
    #[arg(long)]
    by_level: bool,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args)]
struct SuiteArgs {
    /// Benchmark folder: level folders, a flat folder of tasks, or one task.
    #[arg(long)]
    root: PathBuf,
    /// Predictions as `<task_id>.txt` or `<task_id>/<pred-name>`.
    #[arg(long)]
    pred_root: PathBuf,
    #[arg(long, default_value = "tracks.txt")]
    pred_name: String,
    /// Tasks evaluated concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Show only the overall aggregate row.
    #[arg(long)]
    overall_only: bool,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args)]
struct DifficultyArgs {
    /// Annotations: a JSON array or one JSON object per line.
    #[arg(long)]
    attrs: PathBuf,
    /// Machine-readable results.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    objects: usize,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability of dropping each ground-truth box.
    #[arg(long, default_value_t = 0.0)]
    miss: f64,
    /// Expected false boxes per frame.
    #[arg(long, default_value_t = 0.0)]
    fp: f64,
    /// Positional jitter sigma in pixels.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Probability of a detection gap per object.
    #[arg(long, default_value_t = 0.0)]
    fragment_prob: f64,
    #[arg(long, default_value_t = 5)]
    fragment_len: usize,
    /// Seed for the corruption; defaults to `--seed`.
    #[arg(long)]
    corruption_seed: Option<u64>,
    #[arg(long)]
    task_id: Option<String>,
    /// Output root; the task lands in `<out>/test/easy/<task_id>`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 0.4)]
    fraction: f64,
}

/// Failure writing an output file.
#[derive(Debug, thiserror::Error)]
#[error("writing {path}: {source}")]
struct OutputError {
    path: PathBuf,
    source: std::io::Error,
}

/// Bad command-line values.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn write_output(path: &Path, text: &str) -> Result<()> {
    let attempt = || -> std::io::Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)
    };
    attempt().map_err(|source| {
        OutputError {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let chain = || err.chain();
    if chain().any(|c| matches!(c.downcast_ref::<MetricsError>(), Some(MetricsError::NoEvaluable))) {
        return 3;
    }
    if chain().any(|c| c.is::<OutputError>()) {
        return 1;
    }
    let input = chain().any(|c| {
        c.is::<IngestError>()
            || c.is::<DifficultyError>()
            || c.is::<MetricsError>()
            || c.is::<SynthError>()
            || c.is::<TrackerError>()
            || c.is::<PropagatorError>()
            || c.is::<UsageError>()
            || c.is::<serde_json::Error>()
    });
    if input {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Cmd::Track(a) => cmd_track(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::EvalSuite(a) => cmd_eval_suite(a),
        Cmd::Difficulty(a) => cmd_difficulty(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Split(a) => cmd_split(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run_detector(command: &str, task_dir: &Path) -> Result<String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .env("REAMOT_TASK_DIR", task_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| UsageError(format!("starting detector `{command}`: {e}")))?;
    let mut out = String::new();
    child
        .stdout
        .take()
        .expect("stdout is piped")
        .read_to_string(&mut out)
        .map_err(|e| UsageError(format!("reading detector output: {e}")))?;
    let status = child.wait().map_err(|e| UsageError(format!("waiting for detector: {e}")))?;
    if !status.success() {
        return Err(UsageError(format!("detector `{command}` exited with {status}")).into());
    }
    Ok(out)
}

#[derive(Serialize)]
struct OverlayBox {
    id: u64,
    #[serde(rename = "box")]
    bbox: reamot::BoundingBox,
    /// `detection` for committed boxes, `propagated` otherwise.
    source: &'static str,
}

#[derive(Serialize)]
struct OverlayFrame<'a> {
    frame: usize,
    path: &'a str,
    boxes: Vec<OverlayBox>,
}

fn overlay_records(tracks: &[Trajectory], frame_paths: &[String]) -> String {
    let mut frames: Vec<Vec<OverlayBox>> = (0..frame_paths.len()).map(|_| Vec::new()).collect();
    for t in tracks {
        for (&f, &bbox) in t.committed() {
            frames[f].push(OverlayBox {
                id: t.track_id(),
                bbox,
                source: "detection",
            });
        }
        for (&f, &bbox) in t.propagated() {
            frames[f].push(OverlayBox {
                id: t.track_id(),
                bbox,
                source: "propagated",
            });
        }
    }
    let mut out = String::new();
    for (frame, mut boxes) in frames.into_iter().enumerate() {
        boxes.sort_by_key(|b| b.id);
        let rec = OverlayFrame {
            frame,
            path: &frame_paths[frame],
            boxes,
        };
        out.push_str(&serde_json::to_string(&rec).expect("overlay serializes"));
        out.push('\n');
    }
    out
}

fn cmd_track(a: TrackArgs) -> Result<()> {
    let task = load_task(&a.task)?;
    let (source, det_text) = match (&a.detections, &a.detector_cmd) {
        (Some(path), _) => (path.display().to_string(), load_text(path)?),
        (None, Some(cmd)) => (format!("detector: {cmd}"), run_detector(cmd, &a.task)?),
        (None, None) => bail!(UsageError("one of --detections or --detector-cmd is required".into())),
    };
    let stream: DetectionStream = read_detections(&det_text).with_context(|| format!("reading {source}"))?;
    let propagator: PropagatorKind = a.propagator.parse()?;
    if !(a.propagator_timeout.is_finite() && a.propagator_timeout > 0.0) {
        bail!(UsageError(format!("propagator timeout {} must be positive", a.propagator_timeout)));
    }
    let config = TrackerConfig {
        max_age: a.max_age,
        iou_gate: a.gate,
        propagator,
        propagator_timeout: Duration::from_secs_f64(a.propagator_timeout),
        emit_propagated: a.emit_propagated,
        min_score: a.min_score,
    };
    config.validate()?;

    let result = run(&task.frame_paths, &stream, &config)?;
    info!("{:?}", result.stats);
    let names = task.frame_names();
    write_output(&a.out, &write_tracks(&result.trajectories, &names)?)?;
    if let Some(path) = &a.overlay {
        write_output(path, &overlay_records(&result.trajectories, &task.frame_paths))?;
    }

    let mut manifest = RunManifest::new(
        "track",
        json!({
            "task_id": task.task_id,
            "gate": config.iou_gate,
            "max_age": config.max_age,
            "propagator": config.propagator.to_string(),
            "emit_propagated": config.emit_propagated,
            "min_score": config.min_score,
            "stats": {
                "frames": result.stats.frames,
                "detections": result.stats.detections,
                "rejected": result.stats.rejected,
                "propagator_fallbacks": result.stats.fallbacks,
                "trajectories": result.stats.trajectories,
            },
        }),
    );
    manifest.add_input("frame listing", task.frame_paths.join("\n").as_bytes());
    manifest.add_input(source, det_text.as_bytes());
    let manifest_path = a.manifest.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".manifest.json");
        PathBuf::from(p)
    });
    write_output(&manifest_path, &manifest.to_json())?;
    eprintln!(
        "{} trajectories over {} frames written to {}",
        result.trajectories.len(),
        task.frame_paths.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ReportFile<'a> {
    manifest: &'a RunManifest,
    skipped: &'a [Skipped],
    #[serde(flatten)]
    report: &'a MetricsReport,
}

fn emit_report(
    scoring: &ScoringArgs,
    manifest: &RunManifest,
    report: &MetricsReport,
    skipped: &[Skipped],
    by_level: bool,
) -> Result<()> {
    let mut text = manifest.to_comment();
    for s in skipped {
        let _ = writeln!(text, "# skipped {}: {}", s.task_id, s.reason);
    }
    text.push_str(&render_text(report, by_level));
    print!("{text}");
    if let Some(path) = &scoring.text {
        write_output(path, &text)?;
    }
    if let Some(path) = &scoring.json {
        let file = ReportFile {
            manifest,
            skipped,
            report,
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        write_output(path, &s)?;
    }
    Ok(())
}

fn check_scoring(s: &ScoringArgs) -> Result<()> {
    if !(s.tp_iou > 0.0 && s.tp_iou <= 1.0) {
        bail!(UsageError(format!("--tp-iou {} must lie in (0, 1]", s.tp_iou)));
    }
    if !(0.0..=1.0).contains(&s.train_fraction) {
        bail!(UsageError(format!("--train-fraction {} must lie in [0, 1]", s.train_fraction)));
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    check_scoring(&a.scoring)?;
    let task = load_task(&a.task)?;
    let pred_text = load_text(&a.pred)?;
    let e = evaluate_task(&task, &pred_text, &a.scoring.options())?;
    let mut manifest = RunManifest::new("eval", a.scoring.config());
    manifest.add_input(format!("gt:{}", task.task_id), reamot::ingest::format_gt(&task.gt).as_bytes());
    manifest.add_path(&a.pred, pred_text.as_bytes());
    let report = aggregate(vec![e.outcome], a.scoring.tp_iou)?;
    emit_report(&a.scoring, &manifest, &report, &[], a.by_level)
}

fn cmd_eval_suite(a: SuiteArgs) -> Result<()> {
    check_scoring(&a.scoring)?;
    if !a.pred_root.is_dir() {
        bail!(IngestError::Missing(a.pred_root.clone()));
    }
    let suite = evaluate_suite(&a.root, &a.pred_root, &a.pred_name, a.jobs, &a.scoring.options())?;
    let mut config = a.scoring.config();
    config["jobs"] = json!(a.jobs);
    let mut manifest = RunManifest::new("eval-suite", config);
    let mut outcomes: Vec<InstructionOutcome> = Vec::new();
    for e in suite.evals {
        manifest.add_digest(format!("gt:{}", e.task_id), e.gt_digest);
        manifest.add_digest(format!("pred:{}", e.task_id), e.pred_digest);
        outcomes.push(e.outcome);
    }
    let report = aggregate(outcomes, a.scoring.tp_iou)?;
    emit_report(&a.scoring, &manifest, &report, &suite.skipped, !a.overall_only)
}

fn read_attrs(text: &str) -> Result<Vec<Annotation>> {
    if text.trim_start().starts_with('[') {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(read_annotations(text)?)
    }
}

#[derive(Serialize)]
struct DifficultyRow {
    task_id: String,
    total: u32,
    level: Level,
}

fn cmd_difficulty(a: DifficultyArgs) -> Result<()> {
    let text = load_text(&a.attrs)?;
    let annotations = read_attrs(&text).with_context(|| format!("reading {}", a.attrs.display()))?;
    let mut rows = Vec::new();
    for ann in &annotations {
        let r = score(&ann.tags).with_context(|| format!("task {}", ann.task_id))?;
        rows.push(DifficultyRow {
            task_id: ann.task_id.clone(),
            total: r.total,
            level: r.level,
        });
    }
    let mut out = String::new();
    let _ = writeln!(out, "{:<40} {:>5}  level", "task", "total");
    for r in &rows {
        let _ = writeln!(out, "{:<40} {:>5}  {}", r.task_id, r.total, r.level.as_str());
    }
    out.push('\n');
    let _ = writeln!(out, "{:<8} {:>6}", "level", "tasks");
    for level in Level::ALL {
        let n = rows.iter().filter(|r| r.level == level).count();
        let _ = writeln!(out, "{:<8} {:>6}", level.as_str(), n);
    }
    print!("{out}");
    if let Some(path) = &a.json {
        let mut manifest = RunManifest::new("difficulty", json!({}));
        manifest.add_path(&a.attrs, text.as_bytes());
        let mut s = serde_json::to_string_pretty(&json!({ "manifest": manifest, "tasks": rows }))?;
        s.push('\n');
        write_output(path, &s)?;
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut spec = SceneSpec::lanes(a.objects, a.frames, a.seed);
    if let Some(id) = &a.task_id {
        if id.is_empty() || id.contains(['/', '\\']) {
            bail!(UsageError(format!("task id `{id}` must be a plain folder name")));
        }
        spec.task_id = id.clone();
    }
    let scene = generate(&spec)?;
    let corruption = CorruptionSpec {
        miss_prob: a.miss,
        fp_rate: a.fp,
        jitter_sigma: a.jitter,
        fragment_prob: a.fragment_prob,
        fragment_len: a.fragment_len,
        seed: a.corruption_seed.unwrap_or(a.seed),
    };
    let stream = corrupt(&scene, &corruption)?;
    let paths = emit(&scene, &stream, &a.out)?;
    let manifest = RunManifest::new(
        "synth",
        json!({
            "task_id": scene.task_id,
            "objects": a.objects,
            "frames": a.frames,
            "seed": a.seed,
            "canvas": [scene.canvas.0, scene.canvas.1],
            "miss_prob": corruption.miss_prob,
            "fp_rate": corruption.fp_rate,
            "jitter_sigma": corruption.jitter_sigma,
            "fragment_prob": corruption.fragment_prob,
            "fragment_len": corruption.fragment_len,
            "corruption_seed": corruption.seed,
        }),
    );
    write_output(&a.out.join("manifest.json"), &manifest.to_json())?;
    println!("task: {}", paths.task_dir.display());
    println!("detections: {}", paths.detections.display());
    println!("attributes: {}", paths.attributes.display());
    Ok(())
}

fn range_text(r: &std::ops::Range<usize>) -> String {
    if r.is_empty() {
        "none".into()
    } else {
        format!("{}..{}", r.start, r.end - 1)
    }
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let s = split_frames(a.frames, a.fraction).map_err(|e| anyhow!(UsageError(e.to_string())))?;
    println!("train {}, test {}", range_text(&s.train), range_text(&s.test));
    Ok(())
}
