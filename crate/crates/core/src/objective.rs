//! Track objective: CTRA consistency between consecutive nodes, fit of the
//! motion-compensated detections to each box, and a weak push away from ego.

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{to_box_frame, BoxDims, Pose2};
use crate::motion::{compensate_point, ctra_predict, ctra_residual, TrackState};
use crate::scene::TimedPoint;

pub type WeightMatrix = [[f64; 6]; 6];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveConfig {
    /// Inverse covariance of the CTRA residual (x, y, θ, s, ω, a).
    pub motion_weight: WeightMatrix,
    pub sensor_weight: f64,
    /// Per meter of box-to-ego distance.
    pub ego_weight: f64,
    /// Hz
    pub annotation_frequency: f64,
}

impl ObjectiveConfig {
    /// `10·f_a·I₆` motion weight, `10³` sensor weight, `10⁻⁴ m⁻¹` ego weight.
    pub fn for_frequency(annotation_frequency: f64) -> Self {
        Self {
            motion_weight: scaled_identity(10.0 * annotation_frequency),
            sensor_weight: 1e3,
            ego_weight: 1e-4,
            annotation_frequency,
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let m = &self.motion_weight;
        for i in 0..6 {
            for j in 0..6 {
                if !m[i][j].is_finite() || (m[i][j] - m[j][i]).abs() > 1e-12 * (1.0 + m[i][j].abs())
                {
                    return Err(ObjectiveError::InvalidConfig(
                        "motion weight must be finite and symmetric",
                    ));
                }
            }
        }
        if !is_positive_semidefinite(m) {
            return Err(ObjectiveError::InvalidConfig(
                "motion weight must be positive semi-definite",
            ));
        }
        if !(self.sensor_weight.is_finite() && self.sensor_weight >= 0.0) {
            return Err(ObjectiveError::InvalidConfig("sensor weight must be >= 0"));
        }
        if !(self.ego_weight.is_finite() && self.ego_weight >= 0.0) {
            return Err(ObjectiveError::InvalidConfig("ego weight must be >= 0"));
        }
        if !(self.annotation_frequency.is_finite() && self.annotation_frequency > 0.0) {
            return Err(ObjectiveError::InvalidConfig(
                "annotation frequency must be > 0",
            ));
        }
        Ok(())
    }
}

pub fn scaled_identity(scale: f64) -> WeightMatrix {
    let mut m = [[0.0; 6]; 6];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = scale;
    }
    m
}

// Cholesky with a tolerance on the pivots; a zero pivot is allowed only when
// the rest of its column is zero too.
fn is_positive_semidefinite(m: &WeightMatrix) -> bool {
    let mut l = [[0.0f64; 6]; 6];
    let scale = (0..6).map(|i| m[i][i].abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-10 * scale;
    for j in 0..6 {
        let mut d = m[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d < -tol {
            return false;
        }
        let pivot = if d > tol { libm::sqrt(d) } else { 0.0 };
        l[j][j] = pivot;
        for i in (j + 1)..6 {
            let mut v = m[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            if pivot == 0.0 {
                if v.abs() > tol {
                    return false;
                }
                l[i][j] = 0.0;
            } else {
                l[i][j] = v / pivot;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveError {
    TrackTooShort(usize),
    NonIncreasingTimestamps,
    LengthMismatch { states: usize, observations: usize },
    InvalidConfig(&'static str),
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveError::TrackTooShort(n) => write!(f, "track has {n} boxes, need at least 2"),
            ObjectiveError::NonIncreasingTimestamps => {
                write!(f, "track timestamps must be strictly increasing")
            }
            ObjectiveError::LengthMismatch {
                states,
                observations,
            } => write!(f, "{states} states but {observations} observations"),
            ObjectiveError::InvalidConfig(msg) => write!(f, "invalid objective config: {msg}"),
        }
    }
}

impl core::error::Error for ObjectiveError {}

/// The optimization variable of one track: a state per annotated sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackVariables {
    pub states: Vec<TrackState>,
    pub timestamps: Vec<f64>,
}

impl TrackVariables {
    pub fn new(states: Vec<TrackState>, timestamps: Vec<f64>) -> Result<Self, ObjectiveError> {
        let vars = Self { states, timestamps };
        vars.validate()?;
        Ok(vars)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if self.states.len() != self.timestamps.len() {
            return Err(ObjectiveError::LengthMismatch {
                states: self.states.len(),
                observations: self.timestamps.len(),
            });
        }
        if self.states.len() < 2 {
            return Err(ObjectiveError::TrackTooShort(self.states.len()));
        }
        if self
            .timestamps
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite())
        {
            return Err(ObjectiveError::NonIncreasingTimestamps);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Everything a track node is compared against at its sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleObservation {
    pub ego: Pose2,
    pub z: f64,
    pub dims: BoxDims,
    /// Associated, uncompensated detections.
    pub points: Vec<TimedPoint>,
}

fn quadratic_form(r: &[f64; 6], m: &WeightMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..6 {
        let mut row = 0.0;
        for j in 0..6 {
            row += m[i][j] * r[j];
        }
        acc += r[i] * row;
    }
    acc
}

/// Weighted CTRA residual of one edge.
pub fn edge_cost(from: &TrackState, to: &TrackState, dt: f64, cfg: &ObjectiveConfig) -> f64 {
    let predicted = ctra_predict(from, dt);
    quadratic_form(&ctra_residual(&predicted, to), &cfg.motion_weight)
}

pub fn motion_cost(vars: &TrackVariables, cfg: &ObjectiveConfig) -> f64 {
    vars.states
        .windows(2)
        .zip(vars.timestamps.windows(2))
        .map(|(s, t)| edge_cost(&s[0], &s[1], t[1] - t[0], cfg))
        .sum()
}

/// `(inlier, fitness)` for one node, compensating each point once.
pub fn sensor_terms(state: &TrackState, dims: &BoxDims, points: &[TimedPoint]) -> (f64, f64) {
    if points.is_empty() {
        return (0.0, 0.0);
    }
    let mut inside = 0usize;
    let mut fit = 0.0;
    for p in points {
        let c = compensate_point(p, state);
        let coords = to_box_frame(c.xy(), &state.pose, dims);
        if coords.is_inside() {
            inside += 1;
        }
        let m = 2.0 * coords.face_margin();
        fit += m * m;
    }
    let n = points.len() as f64;
    (1.0 - inside as f64 / n, fit / n)
}

/// One minus the fraction of compensated points inside the candidate footprint.
/// `z` is accepted for symmetry with the association test; membership is 2D.
pub fn inlier_cost(state: &TrackState, _z: f64, dims: &BoxDims, points: &[TimedPoint]) -> f64 {
    sensor_terms(state, dims, points).0
}

/// Mean of `(2·min(u, v, 1−u, 1−v))²` over the compensated points.
pub fn fitness_cost(state: &TrackState, dims: &BoxDims, points: &[TimedPoint]) -> f64 {
    sensor_terms(state, dims, points).1
}

pub fn ego_cost(state: &TrackState, ego: &Pose2, cfg: &ObjectiveConfig) -> f64 {
    -cfg.ego_weight * state.pose.distance_to(ego)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostBreakdown {
    pub motion: f64,
    /// Already multiplied by the sensor weight.
    pub sensor: f64,
    pub ego: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.motion + self.sensor + self.ego
    }
}

fn check_lengths(vars: &TrackVariables, obs: &[SampleObservation]) -> Result<(), ObjectiveError> {
    if vars.states.len() != obs.len() || vars.timestamps.len() != obs.len() {
        return Err(ObjectiveError::LengthMismatch {
            states: vars.states.len(),
            observations: obs.len(),
        });
    }
    Ok(())
}

/// Per-term costs. The motion term runs over edges; the sensor and ego
/// terms run over every node including the first.
pub fn cost_breakdown(
    vars: &TrackVariables,
    obs: &[SampleObservation],
    cfg: &ObjectiveConfig,
) -> Result<CostBreakdown, ObjectiveError> {
    check_lengths(vars, obs)?;
    Ok(breakdown_unchecked(vars, obs, cfg))
}

pub(crate) fn breakdown_unchecked(
    vars: &TrackVariables,
    obs: &[SampleObservation],
    cfg: &ObjectiveConfig,
) -> CostBreakdown {
    let mut out = CostBreakdown {
        motion: motion_cost(vars, cfg),
        ..CostBreakdown::default()
    };
    for (state, o) in vars.states.iter().zip(obs) {
        let (inlier, fit) = sensor_terms(state, &o.dims, &o.points);
        out.sensor += cfg.sensor_weight * (inlier + fit);
        out.ego += ego_cost(state, &o.ego, cfg);
    }
    out
}

pub fn total_cost(
    vars: &TrackVariables,
    obs: &[SampleObservation],
    cfg: &ObjectiveConfig,
) -> Result<f64, ObjectiveError> {
    cost_breakdown(vars, obs, cfg).map(|b| b.total())
}
