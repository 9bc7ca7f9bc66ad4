//! Scene-level orchestration: association, initialization and per-track
//! optimization. Planning and assembly are separate from solving so that a
//! caller can run the independent [`TrackJob`]s on any executor.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::association::{associate, AssociationError, InflationParams, SpeedEstimates};
use crate::geometry::{BoxAnnotation, Pose2};
use crate::motion::TrackState;
use crate::objective::{
    breakdown_unchecked, ObjectiveConfig, ObjectiveError, SampleObservation, TrackVariables,
};
use crate::optimizer::{pattern_search, SearchBounds, SearchConfig, SearchError};
use crate::scene::{group_tracks, Scene, SceneError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionConfig {
    pub objective: ObjectiveConfig,
    pub search: SearchConfig,
    pub bounds: SearchBounds,
    pub inflation: InflationParams,
}

impl CorrectionConfig {
    /// Default weights, bounds and inflation for a scene's timing.
    pub fn for_scene(scene: &Scene) -> Self {
        Self {
            objective: ObjectiveConfig::for_frequency(scene.metadata.annotation_frequency),
            search: SearchConfig::default(),
            bounds: SearchBounds::default(),
            inflation: InflationParams::with_sensor_period(scene.metadata.sensor_period),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.objective
            .validate()
            .map_err(PipelineError::Objective)?;
        self.search.validate().map_err(PipelineError::Search)?;
        self.bounds.validate().map_err(PipelineError::Search)?;
        self.inflation
            .validate()
            .map_err(PipelineError::Association)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PipelineError {
    Scene(SceneError),
    Association(AssociationError),
    Objective(ObjectiveError),
    Search(SearchError),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Scene(e) => write!(f, "invalid scene: {e}"),
            PipelineError::Association(e) => write!(f, "association failed: {e}"),
            PipelineError::Objective(e) => write!(f, "{e}"),
            PipelineError::Search(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PipelineError {}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dynamics {
    pub speed: f64,
    pub yaw_rate: f64,
    pub accel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipReason {
    /// Fewer than two boxes: no motion constraint can be formed.
    TooShort,
    /// Non-finite costs or states.
    Degenerate,
}

impl SkipReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            SkipReason::TooShort => "too_short",
            SkipReason::Degenerate => "degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "too_short" => Some(SkipReason::TooShort),
            "degenerate" => Some(SkipReason::Degenerate),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackDiagnostics {
    pub track_id: String,
    pub boxes: usize,
    pub initial_cost: Option<f64>,
    pub final_cost: Option<f64>,
    pub evaluations: usize,
    pub skipped: Option<SkipReason>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionResult {
    /// Same order, ids, timestamps, heights and dims as the input; only the
    /// poses differ.
    pub corrected: Vec<BoxAnnotation>,
    /// Estimated dynamics per corrected box; `None` for passed-through tracks.
    pub dynamics: Vec<Option<Dynamics>>,
    /// One entry per track, ordered by track id.
    pub diagnostics: Vec<TrackDiagnostics>,
}

impl CorrectionResult {
    pub fn state(&self, index: usize) -> Option<TrackState> {
        self.dynamics[index].map(|d| TrackState {
            pose: self.corrected[index].pose,
            speed: d.speed,
            yaw_rate: d.yaw_rate,
            accel: d.accel,
        })
    }
}

/// Naive initial guess: poses from the annotations, speed from the
/// finite difference of positions projected on each box's heading (backward
/// difference for the last box), zero turn rate and acceleration.
pub fn initial_guess(boxes: &[&BoxAnnotation]) -> Result<TrackVariables, ObjectiveError> {
    if boxes.len() < 2 {
        return Err(ObjectiveError::TrackTooShort(boxes.len()));
    }
    let n = boxes.len();
    let timestamps: Vec<f64> = boxes.iter().map(|b| b.timestamp).collect();
    let states = (0..n)
        .map(|i| {
            let (a, b) = if i + 1 < n {
                (i, i + 1)
            } else {
                (n - 2, n - 1)
            };
            let dt = boxes[b].timestamp - boxes[a].timestamp;
            let [hx, hy] = boxes[i].pose.heading();
            let vx = (boxes[b].pose.x - boxes[a].pose.x) / dt;
            let vy = (boxes[b].pose.y - boxes[a].pose.y) / dt;
            TrackState {
                pose: boxes[i].pose,
                speed: vx * hx + vy * hy,
                yaw_rate: 0.0,
                accel: 0.0,
            }
        })
        .collect();
    TrackVariables::new(states, timestamps)
}

/// Initial speed of every annotated box; boxes of single-box tracks get 0.
pub fn naive_speed_estimates(scene: &Scene) -> SpeedEstimates {
    naive_speeds(&scene.annotations)
}

pub fn naive_speeds(annotations: &[BoxAnnotation]) -> SpeedEstimates {
    let mut out = SpeedEstimates::new();
    for (track, idx) in group_tracks(annotations) {
        let boxes: Vec<&BoxAnnotation> = idx.iter().map(|&i| &annotations[i]).collect();
        match initial_guess(&boxes) {
            Ok(vars) => {
                for (b, s) in boxes.iter().zip(&vars.states) {
                    let speed = if s.speed.is_finite() { s.speed } else { 0.0 };
                    out.insert((track.clone(), b.sample_index), speed);
                }
            }
            Err(_) => {
                for b in &boxes {
                    out.insert((track.clone(), b.sample_index), 0.0);
                }
            }
        }
    }
    out
}

/// Per-track observations shared by correction and the metrics.
pub struct AssociatedScene {
    pub speeds: SpeedEstimates,
    /// Associated raw points per annotation, in annotation order.
    pub clouds: Vec<Vec<crate::scene::TimedPoint>>,
}

pub fn associate_scene(
    scene: &Scene,
    inflation: &InflationParams,
) -> Result<AssociatedScene, PipelineError> {
    let speeds = naive_speed_estimates(scene);
    let clouds = associate(scene, &speeds, inflation)
        .map_err(PipelineError::Association)?
        .into_iter()
        .map(|c| c.points)
        .collect();
    Ok(AssociatedScene { speeds, clouds })
}

/// Everything needed to correct one track, independent of other tracks.
#[derive(Clone, Debug)]
pub struct TrackJob {
    pub track_id: String,
    /// Annotation indices in sample order.
    pub indices: Vec<usize>,
    pub start: Option<TrackVariables>,
    pub observations: Vec<SampleObservation>,
}

#[derive(Clone, Debug)]
pub struct TrackOutcome {
    pub track_id: String,
    pub indices: Vec<usize>,
    pub states: Option<Vec<TrackState>>,
    pub diagnostics: TrackDiagnostics,
}

impl TrackJob {
    fn skipped(
        &self,
        reason: SkipReason,
        initial_cost: Option<f64>,
        evaluations: usize,
    ) -> TrackOutcome {
        TrackOutcome {
            track_id: self.track_id.clone(),
            indices: self.indices.clone(),
            states: None,
            diagnostics: TrackDiagnostics {
                track_id: self.track_id.clone(),
                boxes: self.indices.len(),
                initial_cost,
                final_cost: None,
                evaluations,
                skipped: Some(reason),
            },
        }
    }

    pub fn solve(&self, cfg: &CorrectionConfig) -> TrackOutcome {
        let Some(start) = &self.start else {
            let reason = if self.indices.len() < 2 {
                SkipReason::TooShort
            } else {
                SkipReason::Degenerate
            };
            return self.skipped(reason, None, 0);
        };
        let cost =
            |v: &TrackVariables| breakdown_unchecked(v, &self.observations, &cfg.objective).total();
        let initial_cost = cost(start);
        if !initial_cost.is_finite() {
            return self.skipped(SkipReason::Degenerate, None, 1);
        }
        let result = match pattern_search(cost, start, &cfg.bounds, &cfg.search) {
            Ok(r) => r,
            Err(_) => return self.skipped(SkipReason::Degenerate, Some(initial_cost), 0),
        };
        let finite =
            result.best_cost.is_finite() && result.best.states.iter().all(|s| s.is_finite());
        if !finite {
            return self.skipped(
                SkipReason::Degenerate,
                Some(initial_cost),
                result.evaluations,
            );
        }
        TrackOutcome {
            track_id: self.track_id.clone(),
            indices: self.indices.clone(),
            states: Some(result.best.states),
            diagnostics: TrackDiagnostics {
                track_id: self.track_id.clone(),
                boxes: self.indices.len(),
                initial_cost: Some(initial_cost),
                final_cost: Some(result.best_cost),
                evaluations: result.evaluations,
                skipped: None,
            },
        }
    }
}

/// Builds one job per track, ordered by track id.
pub fn plan_scene(scene: &Scene, cfg: &CorrectionConfig) -> Result<Vec<TrackJob>, PipelineError> {
    scene.validate().map_err(PipelineError::Scene)?;
    cfg.validate()?;
    let associated = associate_scene(scene, &cfg.inflation)?;
    let mut clouds = associated.clouds;
    let jobs = scene
        .tracks()
        .into_iter()
        .map(|(track_id, indices)| {
            let boxes: Vec<&BoxAnnotation> =
                indices.iter().map(|&i| &scene.annotations[i]).collect();
            let start = initial_guess(&boxes)
                .ok()
                .filter(|v| v.states.iter().all(|s| s.is_finite()));
            let observations = indices
                .iter()
                .map(|&i| {
                    let a = &scene.annotations[i];
                    SampleObservation {
                        ego: scene.ego[a.sample_index],
                        z: a.z,
                        dims: a.dims,
                        points: core::mem::take(&mut clouds[i]),
                    }
                })
                .collect();
            TrackJob {
                track_id,
                indices,
                start,
                observations,
            }
        })
        .collect();
    Ok(jobs)
}

/// Merges outcomes into a result covering every input box. Outcomes may
/// arrive in any order.
pub fn assemble(scene: &Scene, mut outcomes: Vec<TrackOutcome>) -> CorrectionResult {
    outcomes.sort_by(|a, b| a.track_id.cmp(&b.track_id));
    let mut corrected = scene.annotations.clone();
    let mut dynamics = alloc::vec![None; corrected.len()];
    let mut diagnostics = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        if let Some(states) = &outcome.states {
            for (&i, s) in outcome.indices.iter().zip(states) {
                corrected[i].pose = Pose2::new(s.pose.x, s.pose.y, s.pose.theta());
                dynamics[i] = Some(Dynamics {
                    speed: s.speed,
                    yaw_rate: s.yaw_rate,
                    accel: s.accel,
                });
            }
        }
        diagnostics.push(outcome.diagnostics);
    }
    CorrectionResult {
        corrected,
        dynamics,
        diagnostics,
    }
}

/// Sequential correction of every track.
pub fn correct_scene(
    scene: &Scene,
    cfg: &CorrectionConfig,
) -> Result<CorrectionResult, PipelineError> {
    let jobs = plan_scene(scene, cfg)?;
    let outcomes = jobs.iter().map(|j| j.solve(cfg)).collect();
    Ok(assemble(scene, outcomes))
}

/// Corrected boxes keyed by `(track_id, sample_index)`.
pub fn index_by_box(result: &CorrectionResult) -> BTreeMap<(String, usize), usize> {
    result
        .corrected
        .iter()
        .enumerate()
        .map(|(i, b)| ((b.track_id.clone(), b.sample_index), i))
        .collect()
}
