//! Synthetic scenes with exact ground truth.
//!
//! Each track follows a CTRA rollout of its initial state. A single rotating
//! scanner on the ego vehicle samples the two faces of every box that face
//! the ego; each point is stamped with the capture offset implied by its
//! azimuth and placed where the face was at that instant. Annotation boxes
//! are then written with a controlled error.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{
    angle_diff, from_box_frame, BoxAnnotation, BoxDims, NormalizedBoxCoords, Pose2,
};
use crate::motion::{ctra_delta, ctra_predict, TrackState};
use crate::pipeline::CorrectionResult;
use crate::scene::{Scene, SceneMetadata, TimedPoint};
use crate::stats::{median, percentile};

pub const DEFAULT_NOISE_SIGMA: f64 = 0.02;

/// Annotation error applied to every box of a track. The time slice is
/// applied first, then the offset along the resulting heading.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InjectedError {
    pub longitudinal_offset: f64,
    pub time_slice: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTrack {
    pub id: String,
    /// State at `start_time`.
    pub initial: TrackState,
    pub dims: BoxDims,
    pub z: f64,
    pub points_per_face: usize,
    pub noise_sigma: f64,
    pub injected: InjectedError,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub num_samples: usize,
    pub annotation_frequency: f64,
    pub sensor_period: f64,
    /// Capture offset of the scan start relative to the annotation timestamp.
    pub scan_phase: f64,
    pub start_time: f64,
    pub tracks: Vec<SynthTrack>,
    /// Ego rollout; the scanner sits at the ego pose.
    pub ego: TrackState,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SynthError {
    InvalidConfig(String),
    IdMismatch(String),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::InvalidConfig(msg) => write!(f, "invalid synth config: {msg}"),
            SynthError::IdMismatch(msg) => write!(f, "ids do not match ground truth: {msg}"),
        }
    }
}

impl core::error::Error for SynthError {}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_samples < 2 {
            return Err(invalid("num_samples must be >= 2"));
        }
        if !(self.annotation_frequency.is_finite() && self.annotation_frequency > 0.0) {
            return Err(invalid("annotation_frequency must be > 0"));
        }
        if !(self.sensor_period.is_finite() && self.sensor_period > 0.0) {
            return Err(invalid("sensor_period must be > 0"));
        }
        if !self.scan_phase.is_finite() || !self.start_time.is_finite() || !self.ego.is_finite() {
            return Err(invalid("non-finite scan_phase, start_time or ego state"));
        }
        let mut ids = BTreeMap::new();
        for t in &self.tracks {
            if ids.insert(t.id.as_str(), ()).is_some() {
                return Err(invalid(format!("duplicate track id {}", t.id)));
            }
            if t.points_per_face < 1 {
                return Err(invalid(format!(
                    "track {}: points_per_face must be >= 1",
                    t.id
                )));
            }
            if !(t.noise_sigma.is_finite() && t.noise_sigma >= 0.0) {
                return Err(invalid(format!("track {}: noise_sigma must be >= 0", t.id)));
            }
            let finite = t.initial.is_finite()
                && t.z.is_finite()
                && t.injected.longitudinal_offset.is_finite()
                && t.injected.time_slice.is_finite();
            if !finite {
                return Err(invalid(format!("track {}: non-finite value", t.id)));
            }
        }
        Ok(())
    }

    pub fn timestamp(&self, sample: usize) -> f64 {
        self.start_time + sample as f64 / self.annotation_frequency
    }

    /// Same noise on every track.
    pub fn with_noise(mut self, sigma: f64) -> Self {
        for t in &mut self.tracks {
            t.noise_sigma = sigma;
        }
        self
    }

    /// Ten vehicles at 10–30 m/s in lanes on both sides of a parked ego,
    /// each annotated `time_slice` seconds off with alternating sign.
    pub fn mixed_traffic(time_slice: f64, seed: u64) -> Self {
        const OFFSETS: [f64; 10] = [-15.0, 10.0, 20.0, -10.0, 0.0, 25.0, -20.0, 5.0, 15.0, -5.0];
        const YAW: [f64; 3] = [0.0, 0.05, -0.05];
        const ACCEL: [f64; 5] = [0.0, 1.5, -1.5, 0.5, -0.5];
        let duration = 1.0;
        let tracks = (0..10)
            .map(|k| {
                let speed = 10.0 + 20.0 * k as f64 / 9.0;
                let left = k % 2 == 0;
                let lane = 5.0 * (k / 2 + 1) as f64;
                let (y, theta, dir) = if left {
                    (lane, PI, -1.0)
                } else {
                    (-lane, 0.0, 1.0)
                };
                let x = OFFSETS[k] - dir * 0.5 * speed * duration;
                let truck = k % 4 == 3;
                let dims = if truck {
                    BoxDims::new(8.0, 2.5, 3.0)
                } else {
                    BoxDims::new(4.5, 1.9, 1.6)
                }
                .expect("positive dims");
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                SynthTrack {
                    id: format!("veh{k:02}"),
                    initial: TrackState::new(x, y, theta, speed, YAW[k % 3], ACCEL[k % 5]),
                    dims,
                    z: 0.5 * dims.height(),
                    points_per_face: 20,
                    noise_sigma: DEFAULT_NOISE_SIGMA,
                    injected: InjectedError {
                        longitudinal_offset: 0.0,
                        time_slice: sign * time_slice,
                    },
                }
            })
            .collect();
        Self {
            num_samples: 10,
            annotation_frequency: 10.0,
            sensor_period: 0.1,
            scan_phase: 0.0,
            start_time: 0.0,
            tracks,
            ego: TrackState::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthRecord {
    pub track_id: String,
    pub sample_index: usize,
    pub state: TrackState,
}

/// Exact state of every box at its annotation timestamp.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

impl GroundTruth {
    pub fn get(&self, track_id: &str, sample_index: usize) -> Option<&TruthRecord> {
        self.records
            .iter()
            .find(|r| r.track_id == track_id && r.sample_index == sample_index)
    }
}

/// Capture offset of a point seen from `ego` under a counter-clockwise sweep
/// starting at the ego heading.
pub fn capture_offset(point_xy: [f64; 2], ego: &Pose2, scan_phase: f64, sensor_period: f64) -> f64 {
    let bearing = libm::atan2(point_xy[1] - ego.y, point_xy[0] - ego.x);
    let mut azimuth = libm::remainder(bearing - ego.theta(), TAU);
    if azimuth < 0.0 {
        azimuth += TAU;
    }
    let frac = (azimuth / TAU).clamp(0.0, 1.0 - f64::EPSILON);
    scan_phase + frac * sensor_period
}

/// Face coordinates of the long side and short side facing `viewer`.
fn visible_face_coords(truth: &Pose2, viewer: [f64; 2], n: usize) -> Vec<NormalizedBoxCoords> {
    let [lon, lat] = truth.inverse_transform_point(viewer);
    let v_face = if lat >= 0.0 { 1.0 } else { 0.0 };
    let u_face = if lon >= 0.0 { 1.0 } else { 0.0 };
    let mut out = Vec::with_capacity(2 * n);
    for j in 0..n {
        let f = (j as f64 + 0.5) / n as f64;
        out.push(NormalizedBoxCoords { u: f, v: v_face });
        out.push(NormalizedBoxCoords { u: u_face, v: f });
    }
    out
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn annotated_pose(truth: &TrackState, injected: &InjectedError) -> Pose2 {
    let mut pose = ctra_predict(truth, injected.time_slice).pose;
    let [hx, hy] = pose.heading();
    pose.x += injected.longitudinal_offset * hx;
    pose.y += injected.longitudinal_offset * hy;
    pose
}

/// Builds the scene and its ground truth. Identical configs give identical
/// scenes.
pub fn generate(cfg: &SynthConfig) -> Result<(Scene, GroundTruth), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let timestamps: Vec<f64> = (0..cfg.num_samples).map(|i| cfg.timestamp(i)).collect();
    let ego: Vec<Pose2> = timestamps
        .iter()
        .map(|t| ctra_predict(&cfg.ego, t - cfg.start_time).pose)
        .collect();
    let mut clouds = alloc::vec![Vec::new(); cfg.num_samples];
    let mut annotations = Vec::new();
    let mut truth = GroundTruth::default();

    for (i, t) in timestamps.iter().enumerate() {
        for track in &cfg.tracks {
            let state = ctra_predict(&track.initial, t - cfg.start_time);
            truth.records.push(TruthRecord {
                track_id: track.id.clone(),
                sample_index: i,
                state,
            });
            annotations.push(BoxAnnotation {
                track_id: track.id.clone(),
                sample_index: i,
                timestamp: *t,
                pose: annotated_pose(&state, &track.injected),
                z: track.z,
                dims: track.dims,
            });

            let h = track.dims.height();
            for coords in visible_face_coords(&state.pose, ego[i].position(), track.points_per_face)
            {
                let anchor = from_box_frame(coords, &state.pose, &track.dims);
                let z = track.z - 0.5 * h + h * uniform(&mut rng);
                // azimuth and position depend on each other; a few rounds settle it
                let mut dt = capture_offset(anchor, &ego[i], cfg.scan_phase, cfg.sensor_period);
                for _ in 0..4 {
                    let d = ctra_delta(&state, dt);
                    dt = capture_offset(
                        [anchor[0] + d.dx, anchor[1] + d.dy],
                        &ego[i],
                        cfg.scan_phase,
                        cfg.sensor_period,
                    );
                }
                let d = ctra_delta(&state, dt);
                let mut noise = [0.0; 3];
                for n in &mut noise {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *n = track.noise_sigma * g;
                }
                let p = TimedPoint::new(
                    anchor[0] + d.dx + noise[0],
                    anchor[1] + d.dy + noise[1],
                    z + noise[2],
                    dt,
                );
                clouds[i].push(p.quantized());
            }
        }
    }

    let scene = Scene {
        metadata: SceneMetadata {
            annotation_frequency: cfg.annotation_frequency,
            sensor_period: cfg.sensor_period,
            timestamps,
        },
        annotations,
        ego,
        clouds,
    };
    Ok((scene, truth))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthError {
    pub track_id: String,
    pub sample_index: usize,
    pub position: f64,
    /// Absolute wrapped heading difference.
    pub heading: f64,
    /// `None` for passed-through boxes, which carry no speed.
    pub speed: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub p95: f64,
}

fn summarize(values: &[f64]) -> Option<Summary> {
    Some(Summary {
        median: median(values)?,
        p95: percentile(values, 95.0)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthEvaluation {
    pub boxes: Vec<TruthError>,
    pub position: Option<Summary>,
    pub heading: Option<Summary>,
    pub speed: Option<Summary>,
}

/// Per-box errors of a correction against ground truth.
pub fn evaluate_against_truth(
    corrected: &CorrectionResult,
    truth: &GroundTruth,
) -> Result<TruthEvaluation, SynthError> {
    if corrected.corrected.len() != truth.records.len() {
        return Err(SynthError::IdMismatch(format!(
            "{} corrected boxes vs {} truth records",
            corrected.corrected.len(),
            truth.records.len()
        )));
    }
    let index: BTreeMap<(&str, usize), &TruthRecord> = truth
        .records
        .iter()
        .map(|r| ((r.track_id.as_str(), r.sample_index), r))
        .collect();
    let mut boxes = Vec::with_capacity(corrected.corrected.len());
    for (b, dynamics) in corrected.corrected.iter().zip(&corrected.dynamics) {
        let Some(t) = index.get(&(b.track_id.as_str(), b.sample_index)) else {
            return Err(SynthError::IdMismatch(format!(
                "no truth for track {} sample {}",
                b.track_id, b.sample_index
            )));
        };
        boxes.push(TruthError {
            track_id: b.track_id.clone(),
            sample_index: b.sample_index,
            position: b.pose.distance_to(&t.state.pose),
            heading: angle_diff(b.pose.theta(), t.state.pose.theta()).abs(),
            speed: dynamics.map(|d| (d.speed - t.state.speed).abs()),
        });
    }
    let pos: Vec<f64> = boxes.iter().map(|e| e.position).collect();
    let head: Vec<f64> = boxes.iter().map(|e| e.heading).collect();
    let speed: Vec<f64> = boxes.iter().filter_map(|e| e.speed).collect();
    Ok(TruthEvaluation {
        position: summarize(&pos),
        heading: summarize(&head),
        speed: summarize(&speed),
        boxes,
    })
}
