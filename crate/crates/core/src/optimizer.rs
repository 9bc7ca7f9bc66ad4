//! Bounded Hooke-Jeeves pattern search.
//!
//! Exploratory moves try `+step` then `-step` on each coordinate in order and
//! keep the first improvement. A successful sweep is followed by pattern
//! moves along the direction of improvement; a failed sweep shrinks every
//! step. Candidates are clamped to the bounds, so the search never evaluates
//! outside them.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::motion::TrackState;
use crate::objective::TrackVariables;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Initial step as a fraction of each coordinate's bound range.
    pub initial_step_fraction: f64,
    pub shrink_factor: f64,
    /// Stop once every step is below this fraction of its bound range.
    pub step_tolerance: f64,
    /// `None` means `200 · dimension`.
    pub max_evaluations: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            initial_step_fraction: 0.0025,
            shrink_factor: 0.5,
            step_tolerance: 1e-4,
            max_evaluations: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchError {
    InvalidConfig(&'static str),
    InvalidBounds(usize),
    DimensionMismatch,
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::InvalidConfig(msg) => write!(f, "invalid search config: {msg}"),
            SearchError::InvalidBounds(i) => {
                write!(f, "lower bound above upper bound at coordinate {i}")
            }
            SearchError::DimensionMismatch => write!(f, "start and bounds differ in dimension"),
        }
    }
}

impl core::error::Error for SearchError {}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.initial_step_fraction) {
            return Err(SearchError::InvalidConfig(
                "initial_step_fraction must be > 0",
            ));
        }
        if !(positive(self.shrink_factor) && self.shrink_factor < 1.0) {
            return Err(SearchError::InvalidConfig(
                "shrink_factor must be in (0, 1)",
            ));
        }
        if !positive(self.step_tolerance) {
            return Err(SearchError::InvalidConfig("step_tolerance must be > 0"));
        }
        if self.max_evaluations == Some(0) {
            return Err(SearchError::InvalidConfig("max_evaluations must be > 0"));
        }
        Ok(())
    }

    pub fn budget(&self, dimension: usize) -> usize {
        self.max_evaluations.unwrap_or(200 * dimension.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub evaluations: usize,
    /// Cost of every accepted base point, starting with the start point.
    pub accepted_costs: Vec<f64>,
}

struct Budgeted<F> {
    f: F,
    evaluations: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budgeted<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.evaluations >= self.max {
            return None;
        }
        self.evaluations += 1;
        let v = (self.f)(x);
        // NaN never counts as an improvement
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.max
    }
}

fn explore<F: FnMut(&[f64]) -> f64>(
    eval: &mut Budgeted<F>,
    base: &[f64],
    base_cost: f64,
    steps: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> (Vec<f64>, f64) {
    let mut x = base.to_vec();
    let mut fx = base_cost;
    for i in 0..x.len() {
        if steps[i] <= 0.0 {
            continue;
        }
        let current = x[i];
        for dir in [1.0, -1.0] {
            let candidate = (current + dir * steps[i]).clamp(lower[i], upper[i]);
            if candidate == current {
                continue;
            }
            x[i] = candidate;
            match eval.eval(&x) {
                Some(v) if v < fx => {
                    fx = v;
                    break;
                }
                Some(_) => x[i] = current,
                None => {
                    x[i] = current;
                    return (x, fx);
                }
            }
        }
        if x[i] == current && eval.exhausted() {
            break;
        }
    }
    (x, fx)
}

/// Minimizes `f` over the box `[lower, upper]` starting from `start`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    let n = start.len();
    if lower.len() != n || upper.len() != n {
        return Err(SearchError::DimensionMismatch);
    }
    if let Some(i) = (0..n).find(|&i| !(lower[i] <= upper[i])) {
        return Err(SearchError::InvalidBounds(i));
    }
    let ranges: Vec<f64> = (0..n).map(|i| upper[i] - lower[i]).collect();
    let mut steps: Vec<f64> = ranges
        .iter()
        .map(|r| r * cfg.initial_step_fraction)
        .collect();
    let tolerances: Vec<f64> = ranges.iter().map(|r| r * cfg.step_tolerance).collect();

    let mut eval = Budgeted {
        f,
        evaluations: 0,
        max: cfg.budget(n),
    };
    let mut base: Vec<f64> = (0..n).map(|i| start[i].clamp(lower[i], upper[i])).collect();
    let mut base_cost = eval.eval(&base).unwrap_or(f64::INFINITY);
    let mut accepted_costs = vec![base_cost];

    let converged = |steps: &[f64]| (0..n).all(|i| ranges[i] == 0.0 || steps[i] < tolerances[i]);

    while !converged(&steps) && !eval.exhausted() {
        let (mut x_new, mut f_new) = explore(&mut eval, &base, base_cost, &steps, lower, upper);
        if f_new < base_cost {
            loop {
                let previous = core::mem::replace(&mut base, x_new);
                base_cost = f_new;
                accepted_costs.push(base_cost);
                let pattern: Vec<f64> = (0..n)
                    .map(|i| (2.0 * base[i] - previous[i]).clamp(lower[i], upper[i]))
                    .collect();
                let Some(pattern_cost) = eval.eval(&pattern) else {
                    break;
                };
                let (x_try, f_try) =
                    explore(&mut eval, &pattern, pattern_cost, &steps, lower, upper);
                if f_try < base_cost {
                    x_new = x_try;
                    f_new = f_try;
                } else {
                    break;
                }
            }
        } else {
            for s in &mut steps {
                *s *= cfg.shrink_factor;
            }
        }
    }

    Ok(SearchOutcome {
        best: base,
        best_cost: base_cost,
        evaluations: eval.evaluations,
        accepted_costs,
    })
}

/// Half-widths of the search box around the initial guess, per state
/// component. `dx` and `dy` bound the longitudinal and lateral offsets in
/// the initial box frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchBounds {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
    pub ds: f64,
    pub domega: f64,
    pub da: f64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            dx: 5.0,
            dy: 5.0,
            dtheta: PI / 16.0,
            ds: 40.0,
            domega: PI / 8.0,
            da: 20.0,
        }
    }
}

impl SearchBounds {
    pub fn as_array(&self) -> [f64; 6] {
        [self.dx, self.dy, self.dtheta, self.ds, self.domega, self.da]
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        match self
            .as_array()
            .iter()
            .position(|b| !(b.is_finite() && *b > 0.0))
        {
            Some(i) => Err(SearchError::InvalidBounds(i)),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackSearchResult {
    pub best: TrackVariables,
    pub best_cost: f64,
    pub evaluations: usize,
    pub accepted_costs: Vec<f64>,
}

fn apply_offsets(start: &TrackVariables, offsets: &[f64]) -> TrackVariables {
    let states = start
        .states
        .iter()
        .zip(offsets.chunks_exact(6))
        .map(|(s, d)| {
            let v = s.to_array();
            // position offsets are longitudinal/lateral in the start box frame
            let [c, sn] = s.pose.heading();
            // θ is wrapped by the constructor; the bound applies to the offset
            TrackState::from_array([
                v[0] + c * d[0] - sn * d[1],
                v[1] + sn * d[0] + c * d[1],
                v[2] + d[2],
                v[3] + d[3],
                v[4] + d[4],
                v[5] + d[5],
            ])
        })
        .collect();
    TrackVariables {
        states,
        timestamps: start.timestamps.clone(),
    }
}

/// Joint search over all `6N` state components of a track, ordered
/// node by node as (x, y, θ, s, ω, a). The position offsets are taken
/// along and across each node's starting heading, so a box can slide along
/// its own axis in a single coordinate move.
pub fn pattern_search<F: FnMut(&TrackVariables) -> f64>(
    mut objective: F,
    start: &TrackVariables,
    bounds: &SearchBounds,
    cfg: &SearchConfig,
) -> Result<TrackSearchResult, SearchError> {
    bounds.validate()?;
    let half = bounds.as_array();
    let n = 6 * start.states.len();
    let upper: Vec<f64> = (0..n).map(|i| half[i % 6]).collect();
    let lower: Vec<f64> = upper.iter().map(|b| -b).collect();
    let origin = vec![0.0; n];
    let outcome = minimize(
        |offsets| objective(&apply_offsets(start, offsets)),
        &origin,
        &lower,
        &upper,
        cfg,
    )?;
    Ok(TrackSearchResult {
        best: apply_offsets(start, &outcome.best),
        best_cost: outcome.best_cost,
        evaluations: outcome.evaluations,
        accepted_costs: outcome.accepted_costs,
    })
}
