//! Benchmark on-disk layout, detection streams and track output.
//!
//! A task directory holds a `gt` record file (or a `gt/` folder of record
//! files), a frame listing at `path.txt` or `img/path.txt`, and a bilingual
//! `description.txt`. Test tasks sit under an `easy`, `medium` or `hard`
//! folder which sets their level.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::difficulty::Level;
use crate::geometry::BoundingBox;
use crate::tracker::Trajectory;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing {0}")]
    Missing(PathBuf),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("task {task}: {message}")]
    Consistency { task: String, message: String },
    #[error("invalid split: {0}")]
    Split(String),
}

impl IngestError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        IngestError::Parse {
            line,
            message: message.into(),
        }
    }
}

fn read_file(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            IngestError::Missing(path.to_path_buf())
        } else {
            IngestError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), IngestError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| IngestError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One ground-truth (or prediction) row: `frame_name, object_id, x1, y1, x2, y2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub frame_name: String,
    pub object_id: u64,
    pub bbox: BoundingBox,
}

/// Parse comma-separated gt records. Blank lines are skipped and whitespace
/// around fields is ignored. A `(frame_name, object_id)` pair may occur once.
pub fn parse_gt(text: &str) -> Result<Vec<GtRecord>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(IngestError::parse(line, format!("expected 6 fields, found {}", fields.len())));
        }
        let frame_name = fields[0];
        if frame_name.is_empty() {
            return Err(IngestError::parse(line, "empty frame name"));
        }
        let object_id: u64 = fields[1]
            .parse()
            .map_err(|_| IngestError::parse(line, format!("object id '{}' is not a nonnegative integer", fields[1])))?;
        let mut coords = [0.0f64; 4];
        for (k, field) in fields[2..].iter().enumerate() {
            coords[k] = field
                .parse()
                .map_err(|_| IngestError::parse(line, format!("coordinate '{field}' is not a number")))?;
        }
        let bbox = BoundingBox::try_from(coords).map_err(|e| IngestError::parse(line, e.to_string()))?;
        if !seen.insert((frame_name.to_string(), object_id)) {
            return Err(IngestError::parse(
                line,
                format!("duplicate record for frame {frame_name}, object {object_id}"),
            ));
        }
        out.push(GtRecord {
            frame_name: frame_name.to_string(),
            object_id,
            bbox,
        });
    }
    Ok(out)
}

pub fn format_gt(records: &[GtRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let b = r.bbox;
        out.push_str(&format!(
            "{}, {}, {}, {}, {}, {}\n",
            r.frame_name,
            r.object_id,
            b.x1(),
            b.y1(),
            b.x2(),
            b.y2()
        ));
    }
    out
}

/// Stem of a frame path, which is how gt records name frames.
pub fn frame_name(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// One language instruction with its frames and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionTask {
    pub task_id: String,
    pub instruction_text: String,
    /// Every nonempty line of the description file, in order.
    pub description_lines: Vec<String>,
    pub frame_paths: Vec<String>,
    pub gt: Vec<GtRecord>,
    pub level: Option<Level>,
}

impl InstructionTask {
    pub fn frame_names(&self) -> Vec<String> {
        self.frame_paths.iter().map(|p| frame_name(p)).collect()
    }

    pub fn frame_index(&self) -> HashMap<String, usize> {
        self.frame_names()
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect()
    }
}

/// Pick the English line: the first line whose non-whitespace characters
/// are mostly ASCII, falling back to the first line.
pub fn select_english_line(lines: &[String]) -> Option<&String> {
    lines
        .iter()
        .find(|l| {
            let (ascii, total) = l
                .chars()
                .filter(|c| !c.is_whitespace())
                .fold((0usize, 0usize), |(a, t), c| (a + usize::from(c.is_ascii()), t + 1));
            total > 0 && ascii * 2 > total
        })
        .or_else(|| lines.first())
}

fn read_gt_source(dir: &Path) -> Result<String, IngestError> {
    let gt = dir.join("gt");
    if gt.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&gt)
            .map_err(|source| IngestError::Io {
                path: gt.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut text = String::new();
        for f in files {
            text.push_str(&read_file(&f)?);
            if !text.ends_with('\n') {
                text.push('\n');
            }
        }
        return Ok(text);
    }
    if gt.is_file() {
        return read_file(&gt);
    }
    let gt_txt = dir.join("gt.txt");
    if gt_txt.is_file() {
        return read_file(&gt_txt);
    }
    Err(IngestError::Missing(gt))
}

fn path_listing(dir: &Path) -> Result<PathBuf, IngestError> {
    [dir.join("path.txt"), dir.join("img").join("path.txt")]
        .into_iter()
        .find(|p| p.is_file())
        .ok_or_else(|| IngestError::Missing(dir.join("path.txt")))
}

/// Load one task directory.
pub fn load_task(dir: &Path) -> Result<InstructionTask, IngestError> {
    if !dir.is_dir() {
        return Err(IngestError::Missing(dir.to_path_buf()));
    }
    let task_id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let gt_text = read_gt_source(dir)?;
    let listing = path_listing(dir)?;
    let frame_paths: Vec<String> = read_file(&listing)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let description_path = dir.join("description.txt");
    let description_lines: Vec<String> = read_file(&description_path)?
        .lines()
        .map(|l| l.trim().trim_start_matches('\u{feff}').to_string())
        .filter(|l| !l.is_empty())
        .collect();
    let instruction_text = select_english_line(&description_lines)
        .cloned()
        .ok_or_else(|| IngestError::Consistency {
            task: task_id.clone(),
            message: format!("{} is empty", description_path.display()),
        })?;

    let gt = parse_gt(&gt_text)?;
    let level = dir
        .parent()
        .and_then(Path::file_name)
        .and_then(|n| Level::from_dir_name(&n.to_string_lossy()));

    let task = InstructionTask {
        task_id,
        instruction_text,
        description_lines,
        frame_paths,
        gt,
        level,
    };
    check_task(&task)?;
    Ok(task)
}

fn check_task(task: &InstructionTask) -> Result<(), IngestError> {
    let fail = |message: String| IngestError::Consistency {
        task: task.task_id.clone(),
        message,
    };
    if task.frame_paths.is_empty() {
        return Err(fail("frame listing is empty".into()));
    }
    let mut names = HashSet::new();
    for n in task.frame_names() {
        if !names.insert(n.clone()) {
            return Err(fail(format!("frame name {n} is listed twice")));
        }
    }
    if let Some(r) = task.gt.iter().find(|r| !names.contains(&r.frame_name)) {
        return Err(fail(format!("gt frame {} is not in the frame listing", r.frame_name)));
    }
    Ok(())
}

/// Which frame-listing location to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskLayout {
    /// `path.txt` at the task root.
    Train,
    /// `img/path.txt`.
    Test,
}

/// Write a task directory that [`load_task`] reads back unchanged.
pub fn write_task(dir: &Path, task: &InstructionTask, layout: TaskLayout) -> Result<(), IngestError> {
    write_file(&dir.join("gt").join("gt.txt"), &format_gt(&task.gt))?;
    let listing = match layout {
        TaskLayout::Train => dir.join("path.txt"),
        TaskLayout::Test => dir.join("img").join("path.txt"),
    };
    let mut paths = task.frame_paths.join("\n");
    paths.push('\n');
    write_file(&listing, &paths)?;
    let mut desc = task.description_lines.join("\n");
    desc.push('\n');
    write_file(&dir.join("description.txt"), &desc)
}

/// Task directories below `root`, sorted. `root` may be a level-split test
/// folder (with `easy`/`medium`/`hard` children), a flat folder of tasks, or
/// a single task.
pub fn discover_tasks(root: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::Missing(root.to_path_buf()));
    }
    if root.join("description.txt").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let children = |dir: &Path| -> Result<Vec<PathBuf>, IngestError> {
        let mut v: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|source| IngestError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        v.sort();
        Ok(v)
    };
    let mut tasks = Vec::new();
    for child in children(root)? {
        let is_level = child
            .file_name()
            .and_then(|n| Level::from_dir_name(&n.to_string_lossy()))
            .is_some();
        if is_level {
            tasks.extend(
                children(&child)?
                    .into_iter()
                    .filter(|p| p.join("description.txt").is_file()),
            );
        } else if child.join("description.txt").is_file() {
            tasks.push(child);
        }
    }
    Ok(tasks)
}

/// Train/test frame ranges of one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSplit {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

fn train_count(n: usize, train_fraction: f64) -> Result<usize, IngestError> {
    if n == 0 {
        return Err(IngestError::Split("nothing to split".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(IngestError::Split(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    // the epsilon absorbs products like 0.29 * 100 = 28.999999999999996
    Ok(((train_fraction * n as f64 + 1e-9).floor() as usize).min(n))
}

/// The first `floor(train_fraction * n)` frames train, the rest test.
pub fn split_frames(n_frames: usize, train_fraction: f64) -> Result<FrameSplit, IngestError> {
    let k = train_count(n_frames, train_fraction)?;
    Ok(FrameSplit {
        train: 0..k,
        test: k..n_frames,
    })
}

/// Split a list of whole sequences (videos) with the same rule, for sources
/// that are too short to split in time.
pub fn split_items<T>(items: &[T], train_fraction: f64) -> Result<(&[T], &[T]), IngestError> {
    let k = train_count(items.len(), train_fraction)?;
    Ok(items.split_at(k))
}

/// A single detector output box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame_index: usize,
    pub bbox: BoundingBox,
    pub score: Option<f64>,
}

/// Detections of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDetections {
    pub frame: usize,
    pub detections: Vec<Detection>,
}

/// Per-frame detections with strictly increasing frame indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionStream {
    frames: Vec<FrameDetections>,
}

impl DetectionStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a frame. Fails when `frame` does not exceed the last one.
    pub fn push(&mut self, frame: usize, boxes: Vec<(BoundingBox, Option<f64>)>) -> Result<(), IngestError> {
        if let Some(last) = self.frames.last() {
            if frame <= last.frame {
                return Err(IngestError::parse(
                    self.frames.len() + 1,
                    format!("frame {frame} does not follow frame {}", last.frame),
                ));
            }
        }
        let detections = boxes
            .into_iter()
            .map(|(bbox, score)| Detection {
                frame_index: frame,
                bbox,
                score,
            })
            .collect();
        self.frames.push(FrameDetections { frame, detections });
        Ok(())
    }

    pub fn frames(&self) -> &[FrameDetections] {
        &self.frames
    }

    pub fn get(&self, frame: usize) -> Option<&FrameDetections> {
        self.frames
            .binary_search_by_key(&frame, |f| f.frame)
            .ok()
            .map(|i| &self.frames[i])
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.frames.last().map(|f| f.frame)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn box_count(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamRecord {
    frame: usize,
    boxes: Vec<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
}

/// Read a line-delimited detection stream:
/// `{"frame":0,"boxes":[[x1,y1,x2,y2],...],"scores":[...]}` per line.
pub fn read_detections(text: &str) -> Result<DetectionStream, IngestError> {
    let mut stream = DetectionStream::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: StreamRecord = serde_json::from_str(raw).map_err(|e| IngestError::parse(line, e.to_string()))?;
        let scores: Vec<Option<f64>> = match rec.scores {
            None => vec![None; rec.boxes.len()],
            Some(s) => {
                if s.len() != rec.boxes.len() {
                    return Err(IngestError::parse(
                        line,
                        format!("{} scores for {} boxes", s.len(), rec.boxes.len()),
                    ));
                }
                if let Some(bad) = s.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(IngestError::parse(line, format!("score {bad} is outside [0, 1]")));
                }
                s.into_iter().map(Some).collect()
            }
        };
        stream
            .push(rec.frame, rec.boxes.into_iter().zip(scores).collect())
            .map_err(|e| match e {
                IngestError::Parse { message, .. } => IngestError::Parse { line, message },
                other => other,
            })?;
    }
    Ok(stream)
}

/// Write a stream in the format [`read_detections`] accepts. Scores are
/// written for a frame only when every detection in it carries one.
pub fn write_detections(stream: &DetectionStream) -> String {
    let mut out = String::new();
    for f in stream.frames() {
        let scores: Option<Vec<f64>> = f.detections.iter().map(|d| d.score).collect();
        let rec = StreamRecord {
            frame: f.frame,
            boxes: f.detections.iter().map(|d| d.bbox).collect(),
            scores: scores.filter(|s| !s.is_empty()),
        };
        out.push_str(&serde_json::to_string(&rec).expect("stream record serializes"));
        out.push('\n');
    }
    out
}

/// Track output in gt column order, one record per (frame, track id) box,
/// sorted by frame then track id. Frames are named by the stem of their path.
pub fn track_records(tracks: &[Trajectory], frame_names: &[String]) -> Result<Vec<GtRecord>, IngestError> {
    let mut rows: Vec<(usize, u64, BoundingBox)> = tracks
        .iter()
        .flat_map(|t| t.output_boxes().into_iter().map(move |(f, b)| (f, t.track_id(), b)))
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    rows.into_iter()
        .map(|(f, id, bbox)| {
            let name = frame_names.get(f).ok_or_else(|| IngestError::Consistency {
                task: String::new(),
                message: format!("track {id} has a box at frame {f} beyond the {} listed frames", frame_names.len()),
            })?;
            Ok(GtRecord {
                frame_name: name.clone(),
                object_id: id,
                bbox,
            })
        })
        .collect()
}

/// [`track_records`] formatted so [`parse_gt`] reads it back.
pub fn write_tracks(tracks: &[Trajectory], frame_names: &[String]) -> Result<String, IngestError> {
    Ok(format_gt(&track_records(tracks, frame_names)?))
}

pub fn load_detections(path: &Path) -> Result<DetectionStream, IngestError> {
    read_detections(&read_file(path)?)
}

pub fn save_text(path: &Path, text: &str) -> Result<(), IngestError> {
    write_file(path, text)
}

pub fn load_text(path: &Path) -> Result<String, IngestError> {
    read_file(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn parses_record() {
        let recs = parse_gt("000001, 3, 10, 20, 50, 80").unwrap();
        assert_eq!(
            recs,
            vec![GtRecord {
                frame_name: "000001".into(),
                object_id: 3,
                bbox: bb(10.0, 20.0, 50.0, 80.0)
            }]
        );
        assert!(parse_gt("").unwrap().is_empty());
        assert!(parse_gt("\n  \n").unwrap().is_empty());
        let tight = parse_gt("a,1,0.5,1,2,3\n").unwrap();
        assert_eq!(tight[0].bbox, bb(0.5, 1.0, 2.0, 3.0));
    }

    #[test]
    fn parse_errors_name_line() {
        let err = parse_gt("000001, 3, 10, 20, 50, 80\n000001, 3, 50, 20, 10, 80").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }), "{err}");
        let err = parse_gt("000001, 3, 50, 20, 10, 80").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 1, .. }));
        assert!(matches!(parse_gt("a, 1, 2, 3").unwrap_err(), IngestError::Parse { line: 1, .. }));
        assert!(matches!(parse_gt("\na, 1, x, 0, 1, 1").unwrap_err(), IngestError::Parse { line: 2, .. }));
        assert!(matches!(parse_gt("a, -1, 0, 0, 1, 1").unwrap_err(), IngestError::Parse { .. }));
        let dup = "a, 1, 0, 0, 1, 1\na, 1, 0, 0, 2, 2\n";
        assert!(matches!(parse_gt(dup).unwrap_err(), IngestError::Parse { line: 2, .. }));
    }

    #[test]
    fn split_rule() {
        let s = split_frames(100, 0.4).unwrap();
        assert_eq!((s.train, s.test), (0..40, 40..100));
        let s = split_frames(1, 0.4).unwrap();
        assert_eq!((s.train, s.test), (0..0, 0..1));
        // floor(2.8) = 2
        let s = split_frames(7, 0.4).unwrap();
        assert_eq!((s.train, s.test), (0..2, 2..7));
        assert!(split_frames(0, 0.4).is_err());
        assert!(split_frames(10, 1.0).is_err());
        assert!(split_frames(10, 0.0).is_err());
        assert_eq!(split_frames(100, 0.29).unwrap().train, 0..29);
    }

    #[test]
    fn split_videos() {
        let videos: Vec<u32> = (0..10).collect();
        let (train, test) = split_items(&videos, 0.4).unwrap();
        assert_eq!(train, &[0, 1, 2, 3]);
        assert_eq!(test.len(), 6);
    }

    #[test]
    fn english_line_selection() {
        let lines = vec!["站着不动、充当保安的人。".to_string(), "People who stand still.".to_string()];
        assert_eq!(select_english_line(&lines).unwrap(), "People who stand still.");
        let only_cn = vec!["行人".to_string()];
        assert_eq!(select_english_line(&only_cn).unwrap(), "行人");
    }

    #[test]
    fn detection_stream_basics() {
        let s = read_detections("{\"frame\":0,\"boxes\":[[0,0,10,10]]}\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.frames()[0].detections[0].bbox, bb(0.0, 0.0, 10.0, 10.0));
        assert_eq!(s.frames()[0].detections[0].frame_index, 0);
        let err = read_detections("{\"frame\":3,\"boxes\":[]}\n{\"frame\":2,\"boxes\":[]}\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }));
        let err = read_detections("{\"frame\":1,\"boxes\":[]}\n{\"frame\":1,\"boxes\":[]}\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }));
        let err = read_detections("{\"frame\":0,\"boxes\":[[5,0,1,1]]}").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 1, .. }));
        let err = read_detections("{\"frame\":0,\"boxes\":[[0,0,1,1]],\"scores\":[0.5,0.2]}").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 1, .. }));
        let err = read_detections("{\"frame\":0,\"boxes\":[],\"extra\":1}").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 1, .. }));
    }

    #[test]
    fn detection_scores_round_trip() {
        let text = "{\"frame\":2,\"boxes\":[[0.5,1.0,3.25,4.0]],\"scores\":[0.75]}\n{\"frame\":5,\"boxes\":[]}\n";
        let s = read_detections(text).unwrap();
        assert_eq!(s.frames()[0].detections[0].score, Some(0.75));
        assert_eq!(write_detections(&s), text);
        assert!(s.get(5).unwrap().detections.is_empty());
        assert!(s.get(3).is_none());
    }

    #[test]
    fn task_directory_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let task = InstructionTask {
            task_id: "MOT17-02_conversation(0)".into(),
            instruction_text: "People who stand still and act as security guards.".into(),
            description_lines: vec![
                "站着不动、充当保安的人。".into(),
                "People who stand still and act as security guards.".into(),
            ],
            frame_paths: (1..=5).map(|i| format!("img/{i:06}.jpg")).collect(),
            gt: vec![
                GtRecord {
                    frame_name: "000001".into(),
                    object_id: 1,
                    bbox: bb(1.0, 2.0, 3.0, 4.0),
                },
                GtRecord {
                    frame_name: "000002".into(),
                    object_id: 2,
                    bbox: bb(5.0, 5.0, 9.5, 9.0),
                },
            ],
            level: Some(Level::Easy),
        };
        let dir = tmp.path().join("test").join("easy").join(&task.task_id);
        write_task(&dir, &task, TaskLayout::Test).unwrap();
        let loaded = load_task(&dir).unwrap();
        assert_eq!(loaded, task);
        assert_eq!(loaded.frame_paths.len(), 5);

        let train_dir = tmp.path().join("train").join(&task.task_id);
        write_task(&train_dir, &task, TaskLayout::Train).unwrap();
        assert_eq!(load_task(&train_dir).unwrap().level, None);

        let found = discover_tasks(&tmp.path().join("test")).unwrap();
        assert_eq!(found, vec![dir.clone()]);
        assert_eq!(discover_tasks(&tmp.path().join("train")).unwrap(), vec![train_dir]);
    }

    #[test]
    fn load_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("t");
        assert!(matches!(load_task(&dir), Err(IngestError::Missing(_))));
        fs::create_dir_all(&dir).unwrap();
        assert!(matches!(load_task(&dir), Err(IngestError::Missing(p)) if p.ends_with("gt")));
        fs::write(dir.join("gt.txt"), "000009, 1, 0, 0, 1, 1\n").unwrap();
        assert!(matches!(load_task(&dir), Err(IngestError::Missing(p)) if p.ends_with("path.txt")));
        fs::write(dir.join("path.txt"), "img/000001.jpg\n").unwrap();
        assert!(matches!(load_task(&dir), Err(IngestError::Missing(p)) if p.ends_with("description.txt")));
        fs::write(dir.join("description.txt"), "cars\n").unwrap();
        let err = load_task(&dir).unwrap_err();
        assert!(matches!(err, IngestError::Consistency { .. }), "{err}");
        fs::write(dir.join("gt.txt"), "000001, 1, 0, 0, 1, 1\n").unwrap();
        assert_eq!(load_task(&dir).unwrap().gt.len(), 1);
    }

    #[test]
    fn gt_folder_files_are_read_in_sorted_order() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("t");
        fs::create_dir_all(dir.join("gt")).unwrap();
        fs::write(dir.join("gt").join("b.txt"), "000002, 1, 0, 0, 1, 1").unwrap();
        fs::write(dir.join("gt").join("a.txt"), "000001, 1, 0, 0, 1, 1\n").unwrap();
        fs::write(dir.join("path.txt"), "000001.jpg\n000002.jpg\n").unwrap();
        fs::write(dir.join("description.txt"), "x\n").unwrap();
        let t = load_task(&dir).unwrap();
        assert_eq!(t.gt[0].frame_name, "000001");
        assert_eq!(t.gt[1].frame_name, "000002");
    }

    fn arb_record() -> impl Strategy<Value = GtRecord> {
        (
            "[0-9]{6}",
            0u64..1000,
            -1000.0..1000.0f64,
            -1000.0..1000.0f64,
            0.0..500.0f64,
            0.0..500.0f64,
        )
            .prop_map(|(name, id, x, y, w, h)| GtRecord {
                frame_name: name,
                object_id: id,
                bbox: bb(x, y, x + w, y + h),
            })
    }

    proptest! {
        #[test]
        fn gt_round_trip(records in proptest::collection::vec(arb_record(), 0..20)) {
            let mut seen = HashSet::new();
            let records: Vec<GtRecord> = records
                .into_iter()
                .filter(|r| seen.insert((r.frame_name.clone(), r.object_id)))
                .collect();
            let text = format_gt(&records);
            let parsed = parse_gt(&text).unwrap();
            prop_assert_eq!(&parsed, &records);
            prop_assert_eq!(format_gt(&parsed), text);
        }

        #[test]
        fn split_covers(n in 1usize..5000, f in 0.01..0.99f64) {
            let s = split_frames(n, f).unwrap();
            prop_assert_eq!(s.train.start, 0);
            prop_assert_eq!(s.train.end, s.test.start);
            prop_assert_eq!(s.test.end, n);
        }
    }
}
