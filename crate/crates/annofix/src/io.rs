//! On-disk scene format.
//!
//! A scene directory holds `scene.json`, `annotations.jsonl`, `ego.jsonl`
//! and one `points/<sample_index>.bin` per sample. Text records use a fixed
//! key order and shortest round-trip float formatting, so writing the same
//! scene twice gives identical bytes. Point files are headerless runs of
//! little-endian `f32` quadruples `(x, y, z, dt)`, 16 bytes per point.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use annofix_core::geometry::{BoxAnnotation, BoxDims, Pose2};
use annofix_core::pipeline::{CorrectionResult, Dynamics, SkipReason, TrackDiagnostics};
use annofix_core::scene::{Location, Scene, SceneMetadata, TimedPoint};
use annofix_core::synth::{GroundTruth, TruthRecord};
use annofix_core::TrackState;

use crate::error::{Error, Offset, Result};

pub const SCENE_FILE: &str = "scene.json";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const EGO_FILE: &str = "ego.jsonl";
pub const POINTS_DIR: &str = "points";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const CORRECTED_FILE: &str = "corrected.jsonl";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";

pub const POINT_RECORD_BYTES: usize = 16;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetadataRecord {
    annotation_frequency: f64,
    sensor_period: f64,
    timestamps: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    track_id: String,
    sample_index: usize,
    timestamp: f64,
    x: f64,
    y: f64,
    theta: f64,
    z: f64,
    length: f64,
    width: f64,
    height: f64,
}

impl From<&BoxAnnotation> for AnnotationRecord {
    fn from(b: &BoxAnnotation) -> Self {
        Self {
            track_id: b.track_id.clone(),
            sample_index: b.sample_index,
            timestamp: b.timestamp,
            x: b.pose.x,
            y: b.pose.y,
            theta: b.pose.theta(),
            z: b.z,
            length: b.dims.length(),
            width: b.dims.width(),
            height: b.dims.height(),
        }
    }
}

impl AnnotationRecord {
    fn into_box(self) -> std::result::Result<BoxAnnotation, String> {
        let dims = BoxDims::new(self.length, self.width, self.height).map_err(|e| e.to_string())?;
        Ok(BoxAnnotation {
            track_id: self.track_id,
            sample_index: self.sample_index,
            timestamp: self.timestamp,
            pose: Pose2::new(self.x, self.y, self.theta),
            z: self.z,
            dims,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EgoRecord {
    sample_index: usize,
    x: f64,
    y: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthLine {
    track_id: String,
    sample_index: usize,
    x: f64,
    y: f64,
    theta: f64,
    speed: f64,
    yaw_rate: f64,
    accel: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrectedRecord {
    track_id: String,
    sample_index: usize,
    timestamp: f64,
    x: f64,
    y: f64,
    theta: f64,
    z: f64,
    length: f64,
    width: f64,
    height: f64,
    speed: Option<f64>,
    yaw_rate: Option<f64>,
    accel: Option<f64>,
    skipped: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnosticsRecord {
    track_id: String,
    boxes: usize,
    initial_cost: Option<f64>,
    final_cost: Option<f64>,
    evaluations: usize,
    skipped: Option<String>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|e| Error::MalformedRecord {
        file: path.to_path_buf(),
        offset: Offset::Byte(e.utf8_error().valid_up_to()),
        message: "not valid UTF-8".into(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Parses one JSON record per non-empty line, remembering line numbers.
fn parse_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            file: path.to_path_buf(),
            offset: Offset::Line(i + 1),
            message: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, &r).expect("records serialize");
        out.push(b'\n');
    }
    out
}

fn malformed(file: &Path, offset: Offset, message: impl Into<String>) -> Error {
    Error::MalformedRecord {
        file: file.to_path_buf(),
        offset,
        message: message.into(),
    }
}

pub fn points_path(dir: &Path, sample: usize) -> PathBuf {
    dir.join(POINTS_DIR).join(format!("{sample}.bin"))
}

pub fn encode_points(points: &[TimedPoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * POINT_RECORD_BYTES);
    for p in points {
        for v in [p.x, p.y, p.z, p.dt] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_points(bytes: &[u8], file: &Path) -> Result<Vec<TimedPoint>> {
    let whole = bytes.len() / POINT_RECORD_BYTES * POINT_RECORD_BYTES;
    if whole != bytes.len() {
        return Err(malformed(
            file,
            Offset::Byte(whole),
            format!(
                "{} trailing bytes; point records are {POINT_RECORD_BYTES} bytes",
                bytes.len() - whole
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(POINT_RECORD_BYTES)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]) as f64;
            TimedPoint::new(f(0), f(4), f(8), f(12))
        })
        .collect())
}

/// Writes the canonical form of `scene` into `dir`, creating it if needed.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<()> {
    create_dir(&dir.join(POINTS_DIR))?;
    let meta = MetadataRecord {
        annotation_frequency: scene.metadata.annotation_frequency,
        sensor_period: scene.metadata.sensor_period,
        timestamps: scene.metadata.timestamps.clone(),
    };
    write_file(&dir.join(SCENE_FILE), &to_jsonl([meta]))?;
    write_annotations(&scene.annotations, dir)?;
    let ego = scene.ego.iter().enumerate().map(|(i, p)| EgoRecord {
        sample_index: i,
        x: p.x,
        y: p.y,
        theta: p.theta(),
    });
    write_file(&dir.join(EGO_FILE), &to_jsonl(ego))?;
    for (i, cloud) in scene.clouds.iter().enumerate() {
        write_file(&points_path(dir, i), &encode_points(cloud))?;
    }
    Ok(())
}

pub fn write_annotations(annotations: &[BoxAnnotation], dir: &Path) -> Result<()> {
    write_file(
        &dir.join(ANNOTATIONS_FILE),
        &to_jsonl(annotations.iter().map(AnnotationRecord::from)),
    )
}

fn location_to_offset(
    dir: &Path,
    location: &Location,
    annotation_lines: &[usize],
) -> (PathBuf, Offset) {
    match location {
        Location::Metadata => (dir.join(SCENE_FILE), Offset::Whole),
        Location::Annotation(i) => (
            dir.join(ANNOTATIONS_FILE),
            Offset::Line(annotation_lines.get(*i).copied().unwrap_or(i + 1)),
        ),
        Location::Ego(i) => (dir.join(EGO_FILE), Offset::Line(i + 1)),
        Location::Point { sample, index } => (
            points_path(dir, *sample),
            Offset::Byte(index * POINT_RECORD_BYTES),
        ),
    }
}

/// Reads and fully validates a scene directory.
pub fn read_scene(dir: &Path) -> Result<Scene> {
    let scene_path = dir.join(SCENE_FILE);
    let meta: MetadataRecord = serde_json::from_str(&read_text(&scene_path)?)
        .map_err(|e| malformed(&scene_path, Offset::Line(e.line()), e.to_string()))?;
    let n = meta.timestamps.len();

    let ann_path = dir.join(ANNOTATIONS_FILE);
    let mut annotations = Vec::new();
    let mut annotation_lines = Vec::new();
    for (line, record) in parse_jsonl::<AnnotationRecord>(&ann_path)? {
        let b = record
            .into_box()
            .map_err(|m| malformed(&ann_path, Offset::Line(line), m))?;
        annotations.push(b);
        annotation_lines.push(line);
    }

    let ego_path = dir.join(EGO_FILE);
    let mut ego = Vec::new();
    for (line, r) in parse_jsonl::<EgoRecord>(&ego_path)? {
        if r.sample_index != ego.len() {
            return Err(Error::InvariantViolation {
                file: ego_path,
                offset: Offset::Line(line),
                message: format!(
                    "expected sample_index {}, found {}",
                    ego.len(),
                    r.sample_index
                ),
            });
        }
        ego.push(Pose2::new(r.x, r.y, r.theta));
    }

    let mut clouds = Vec::with_capacity(n);
    for i in 0..n {
        let path = points_path(dir, i);
        clouds.push(decode_points(&read_file(&path)?, &path)?);
    }

    let scene = Scene {
        metadata: SceneMetadata {
            annotation_frequency: meta.annotation_frequency,
            sensor_period: meta.sensor_period,
            timestamps: meta.timestamps,
        },
        annotations,
        ego,
        clouds,
    };
    scene.validate().map_err(|e| {
        let (file, offset) = location_to_offset(dir, &e.location, &annotation_lines);
        Error::InvariantViolation {
            file,
            offset,
            message: e.message,
        }
    })?;
    Ok(scene)
}

pub fn write_truth(truth: &GroundTruth, dir: &Path) -> Result<()> {
    let lines = truth.records.iter().map(|r| {
        let [x, y, theta, speed, yaw_rate, accel] = r.state.to_array();
        TruthLine {
            track_id: r.track_id.clone(),
            sample_index: r.sample_index,
            x,
            y,
            theta,
            speed,
            yaw_rate,
            accel,
        }
    });
    write_file(&dir.join(TRUTH_FILE), &to_jsonl(lines))
}

/// Reads `truth.jsonl` from `dir`.
pub fn read_truth(dir: &Path) -> Result<GroundTruth> {
    let records = parse_jsonl::<TruthLine>(&dir.join(TRUTH_FILE))?
        .into_iter()
        .map(|(_, r)| TruthRecord {
            track_id: r.track_id,
            sample_index: r.sample_index,
            state: TrackState::new(r.x, r.y, r.theta, r.speed, r.yaw_rate, r.accel),
        })
        .collect();
    Ok(GroundTruth { records })
}

/// Writes `corrected.jsonl` and `diagnostics.jsonl`.
pub fn write_corrected(result: &CorrectionResult, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let skipped: std::collections::BTreeMap<&str, SkipReason> = result
        .diagnostics
        .iter()
        .filter_map(|d| d.skipped.map(|s| (d.track_id.as_str(), s)))
        .collect();
    let records = result.corrected.iter().zip(&result.dynamics).map(|(b, d)| {
        let a = AnnotationRecord::from(b);
        CorrectedRecord {
            track_id: a.track_id,
            sample_index: a.sample_index,
            timestamp: a.timestamp,
            x: a.x,
            y: a.y,
            theta: a.theta,
            z: a.z,
            length: a.length,
            width: a.width,
            height: a.height,
            speed: d.map(|d| d.speed),
            yaw_rate: d.map(|d| d.yaw_rate),
            accel: d.map(|d| d.accel),
            skipped: skipped
                .get(b.track_id.as_str())
                .map(|s| s.as_str().to_string()),
        }
    });
    write_file(&dir.join(CORRECTED_FILE), &to_jsonl(records))?;
    let diagnostics = result.diagnostics.iter().map(|d| DiagnosticsRecord {
        track_id: d.track_id.clone(),
        boxes: d.boxes,
        initial_cost: d.initial_cost,
        final_cost: d.final_cost,
        evaluations: d.evaluations,
        skipped: d.skipped.map(|s| s.as_str().to_string()),
    });
    write_file(&dir.join(DIAGNOSTICS_FILE), &to_jsonl(diagnostics))
}

fn parse_skip(file: &Path, line: usize, s: Option<String>) -> Result<Option<SkipReason>> {
    match s {
        None => Ok(None),
        Some(s) => SkipReason::parse(&s).map(Some).ok_or_else(|| {
            malformed(
                file,
                Offset::Line(line),
                format!("unknown skip reason {s:?}"),
            )
        }),
    }
}

/// Reads back what [`write_corrected`] wrote.
pub fn read_corrected(dir: &Path) -> Result<CorrectionResult> {
    let path = dir.join(CORRECTED_FILE);
    let mut corrected = Vec::new();
    let mut dynamics = Vec::new();
    for (line, r) in parse_jsonl::<CorrectedRecord>(&path)? {
        let d = match (r.speed, r.yaw_rate, r.accel) {
            (Some(speed), Some(yaw_rate), Some(accel)) => Some(Dynamics {
                speed,
                yaw_rate,
                accel,
            }),
            (None, None, None) => None,
            _ => {
                return Err(malformed(
                    &path,
                    Offset::Line(line),
                    "speed, yaw_rate and accel must be all set or all null",
                ))
            }
        };
        parse_skip(&path, line, r.skipped)?;
        let b = AnnotationRecord {
            track_id: r.track_id,
            sample_index: r.sample_index,
            timestamp: r.timestamp,
            x: r.x,
            y: r.y,
            theta: r.theta,
            z: r.z,
            length: r.length,
            width: r.width,
            height: r.height,
        }
        .into_box()
        .map_err(|m| malformed(&path, Offset::Line(line), m))?;
        corrected.push(b);
        dynamics.push(d);
    }
    let diag_path = dir.join(DIAGNOSTICS_FILE);
    let mut diagnostics = Vec::new();
    for (line, r) in parse_jsonl::<DiagnosticsRecord>(&diag_path)? {
        diagnostics.push(TrackDiagnostics {
            track_id: r.track_id,
            boxes: r.boxes,
            initial_cost: r.initial_cost,
            final_cost: r.final_cost,
            evaluations: r.evaluations,
            skipped: parse_skip(&diag_path, line, r.skipped)?,
        });
    }
    Ok(CorrectionResult {
        corrected,
        dynamics,
        diagnostics,
    })
}

/// Copies a file byte for byte.
pub fn copy_file(from: &Path, to: &Path) -> Result<()> {
    if !from.exists() {
        return Err(Error::MissingFile(from.to_path_buf()));
    }
    fs::copy(from, to).map(|_| ()).map_err(|e| Error::io(to, e))
}

/// Writes a small text artifact such as a CSV or SVG report.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    write_file(path, text.as_bytes())
}
