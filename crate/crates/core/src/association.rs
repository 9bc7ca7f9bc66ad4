//! Point-to-box association against speed-inflated original annotations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{volume_contains, BoxAnnotation, BoxDims};
use crate::scene::{Scene, TimedPoint};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationParams {
    /// Fixed growth at each end along the box x-axis, meters.
    pub base_margin: f64,
    /// Sweep duration of the sensor; scales the speed-dependent growth.
    pub sensor_period: f64,
    /// Growth on each side, meters.
    pub lateral_margin: f64,
    /// How far the bottom face is raised, meters.
    pub bottom_deflate: f64,
}

impl InflationParams {
    pub fn with_sensor_period(sensor_period: f64) -> Self {
        Self {
            base_margin: 1.0,
            sensor_period,
            lateral_margin: 0.5,
            bottom_deflate: 0.2,
        }
    }

    pub fn validate(&self) -> Result<(), AssociationError> {
        let ok = self.base_margin >= 0.0
            && self.sensor_period > 0.0
            && self.lateral_margin >= 0.0
            && self.bottom_deflate >= 0.0
            && self.base_margin.is_finite()
            && self.sensor_period.is_finite()
            && self.lateral_margin.is_finite()
            && self.bottom_deflate.is_finite();
        if ok {
            Ok(())
        } else {
            Err(AssociationError::InvalidParams)
        }
    }

    /// Dimensions of the inflated box for a given speed estimate.
    pub fn inflate(&self, dims: &BoxDims, speed: f64) -> BoxDims {
        let end_margin = self.base_margin + self.sensor_period * speed.abs();
        BoxDims::new(
            dims.length() + 2.0 * end_margin,
            dims.width() + 2.0 * self.lateral_margin,
            dims.height(),
        )
        .expect("inflation only grows positive dims")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AssociationError {
    MissingSpeedEstimate {
        track_id: String,
        sample_index: usize,
    },
    InvalidParams,
}

impl fmt::Display for AssociationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssociationError::MissingSpeedEstimate {
                track_id,
                sample_index,
            } => write!(
                f,
                "no speed estimate for track {track_id} at sample {sample_index}"
            ),
            AssociationError::InvalidParams => write!(
                f,
                "inflation margins must be >= 0 and the sensor period > 0"
            ),
        }
    }
}

impl core::error::Error for AssociationError {}

/// Raw (uncompensated) detections assigned to one box.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociatedCloud {
    pub track_id: String,
    pub sample_index: usize,
    pub points: Vec<TimedPoint>,
}

pub type SpeedEstimates = BTreeMap<(String, usize), f64>;

pub fn point_in_inflated_box(
    point: &TimedPoint,
    annotation: &BoxAnnotation,
    speed: f64,
    params: &InflationParams,
) -> bool {
    let inflated = params.inflate(&annotation.dims, speed);
    volume_contains(
        point.xyz(),
        &annotation.pose,
        annotation.z,
        &inflated,
        params.bottom_deflate,
    )
}

/// One cloud per annotation, in annotation order. Points keep their input
/// order and may be shared between overlapping boxes.
pub fn associate(
    scene: &Scene,
    speed_estimates: &SpeedEstimates,
    params: &InflationParams,
) -> Result<Vec<AssociatedCloud>, AssociationError> {
    params.validate()?;
    scene
        .annotations
        .iter()
        .map(|a| {
            let speed = *speed_estimates
                .get(&(a.track_id.clone(), a.sample_index))
                .ok_or_else(|| AssociationError::MissingSpeedEstimate {
                    track_id: a.track_id.clone(),
                    sample_index: a.sample_index,
                })?;
            let inflated = params.inflate(&a.dims, speed);
            let points = scene.clouds[a.sample_index]
                .iter()
                .filter(|p| {
                    volume_contains(p.xyz(), &a.pose, a.z, &inflated, params.bottom_deflate)
                })
                .copied()
                .collect();
            Ok(AssociatedCloud {
                track_id: a.track_id.clone(),
                sample_index: a.sample_index,
                points,
            })
        })
        .collect()
}
