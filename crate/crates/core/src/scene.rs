//! Scene container: annotations, ego poses and timed point clouds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{BoxAnnotation, Pose2};

/// One detection in the global frame. `dt` is capture time minus the
/// annotation reference time of its sample, in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub dt: f64,
}

impl TimedPoint {
    pub fn new(x: f64, y: f64, z: f64, dt: f64) -> Self {
        Self { x, y, z, dt }
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.dt.is_finite()
    }

    /// Rounds every field to the nearest `f32`, the on-disk precision.
    pub fn quantized(&self) -> Self {
        Self {
            x: self.x as f32 as f64,
            y: self.y as f32 as f64,
            z: self.z as f32 as f64,
            dt: self.dt as f32 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneMetadata {
    /// Hz
    pub annotation_frequency: f64,
    /// Duration of one sensor sweep, seconds.
    pub sensor_period: f64,
    /// Reference timestamp of each annotation sample, seconds.
    pub timestamps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub metadata: SceneMetadata,
    pub annotations: Vec<BoxAnnotation>,
    /// One ego pose per sample.
    pub ego: Vec<Pose2>,
    /// One cloud per sample.
    pub clouds: Vec<Vec<TimedPoint>>,
}

/// Where a violation was found, for error reporting.
#[derive(Clone, Debug, PartialEq)]
pub enum Location {
    Metadata,
    Annotation(usize),
    Ego(usize),
    Point { sample: usize, index: usize },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Metadata => write!(f, "metadata"),
            Location::Annotation(i) => write!(f, "annotation #{i}"),
            Location::Ego(i) => write!(f, "ego pose #{i}"),
            Location::Point { sample, index } => write!(f, "sample {sample} point #{index}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneError {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl core::error::Error for SceneError {}

fn violation(location: Location, message: impl Into<String>) -> SceneError {
    SceneError {
        location,
        message: message.into(),
    }
}

impl Scene {
    pub fn num_samples(&self) -> usize {
        self.metadata.timestamps.len()
    }

    /// Checks every structural invariant; the first violation is returned.
    pub fn validate(&self) -> Result<(), SceneError> {
        use alloc::format;
        let meta = &self.metadata;
        if !(meta.annotation_frequency.is_finite() && meta.annotation_frequency > 0.0) {
            return Err(violation(
                Location::Metadata,
                "annotation_frequency must be > 0",
            ));
        }
        if !(meta.sensor_period.is_finite() && meta.sensor_period > 0.0) {
            return Err(violation(Location::Metadata, "sensor_period must be > 0"));
        }
        if meta.timestamps.iter().any(|t| !t.is_finite()) {
            return Err(violation(Location::Metadata, "non-finite sample timestamp"));
        }
        if meta.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(violation(
                Location::Metadata,
                "sample timestamps must be strictly increasing",
            ));
        }
        let n = self.num_samples();
        if self.ego.len() != n {
            return Err(violation(
                Location::Metadata,
                format!("{} ego poses for {n} samples", self.ego.len()),
            ));
        }
        if self.clouds.len() != n {
            return Err(violation(
                Location::Metadata,
                format!("{} point clouds for {n} samples", self.clouds.len()),
            ));
        }
        for (i, e) in self.ego.iter().enumerate() {
            if !(e.x.is_finite() && e.y.is_finite() && e.theta().is_finite()) {
                return Err(violation(Location::Ego(i), "non-finite ego pose"));
            }
        }
        for (sample, cloud) in self.clouds.iter().enumerate() {
            if let Some(index) = cloud.iter().position(|p| !p.is_finite()) {
                return Err(violation(
                    Location::Point { sample, index },
                    "non-finite point",
                ));
            }
        }

        let mut seen = BTreeSet::new();
        let mut last: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for (i, a) in self.annotations.iter().enumerate() {
            let loc = || Location::Annotation(i);
            if a.sample_index >= n {
                return Err(violation(
                    loc(),
                    format!("sample_index {} out of range ({n} samples)", a.sample_index),
                ));
            }
            let finite = a.timestamp.is_finite()
                && a.pose.x.is_finite()
                && a.pose.y.is_finite()
                && a.pose.theta().is_finite()
                && a.z.is_finite();
            if !finite {
                return Err(violation(loc(), "non-finite annotation field"));
            }
            if !seen.insert((a.track_id.as_str(), a.sample_index)) {
                return Err(violation(
                    loc(),
                    format!(
                        "duplicate (track_id, sample_index) = ({}, {})",
                        a.track_id, a.sample_index
                    ),
                ));
            }
            if let Some(&(prev_idx, prev_t)) = last.get(a.track_id.as_str()) {
                let ordered = (a.sample_index > prev_idx) == (a.timestamp > prev_t);
                if !ordered || a.timestamp == prev_t {
                    return Err(violation(
                        loc(),
                        format!(
                            "track {} timestamps not strictly increasing with sample_index",
                            a.track_id
                        ),
                    ));
                }
            }
            last.insert(a.track_id.as_str(), (a.sample_index, a.timestamp));
        }
        // pairwise order check above only compares neighbours in file order
        for (track, idx) in self.tracks() {
            let boxes: Vec<&BoxAnnotation> = idx.iter().map(|&i| &self.annotations[i]).collect();
            if boxes.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
                return Err(violation(
                    Location::Annotation(idx[0]),
                    format!("track {track} timestamps not strictly increasing with sample_index"),
                ));
            }
        }
        Ok(())
    }

    /// Annotation indices per track id, each sorted by sample index.
    pub fn tracks(&self) -> BTreeMap<String, Vec<usize>> {
        group_tracks(&self.annotations)
    }
}

/// Annotation indices per track id, each list ordered by sample index.
pub fn group_tracks(annotations: &[BoxAnnotation]) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, a) in annotations.iter().enumerate() {
        out.entry(a.track_id.clone()).or_default().push(i);
    }
    for idx in out.values_mut() {
        idx.sort_by_key(|&i| annotations[i].sample_index);
    }
    out
}
