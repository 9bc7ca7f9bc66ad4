//! Annotation-quality metrics: inlier points difference (IPD), per-box
//! position error (EDE) and its heading-frame decomposition (DEDE), the
//! spread of DEDE (SDEDE), grouped percentile tables, and Gaussian error
//! injection for sensitivity studies.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::association::InflationParams;
use crate::geometry::{footprint_contains, BoxAnnotation, Pose2};
use crate::motion::compensate_point;
use crate::pipeline::{associate_scene, naive_speeds, CorrectionResult, PipelineError};
use crate::scene::Scene;
use crate::stats::{bin_index, percentile_sorted, population_std, sorted};

/// Speed below which a box is not considered moving, m/s.
pub const DEFAULT_MIN_SPEED: f64 = 3.0;

/// Percentiles reported per group.
pub const GROUP_PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

#[derive(Clone, Debug, PartialEq)]
pub enum MetricsError {
    MismatchedBoxes(String),
    InsufficientData { records: usize },
    InvalidEdges,
    Pipeline(PipelineError),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::MismatchedBoxes(msg) => write!(f, "box sets do not match: {msg}"),
            MetricsError::InsufficientData { records } => {
                write!(f, "need at least 2 records, have {records}")
            }
            MetricsError::InvalidEdges => write!(f, "bin edges must be strictly increasing"),
            MetricsError::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MetricsError {}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub track_id: String,
    pub sample_index: usize,
    pub ede: f64,
    /// Original minus corrected, along the corrected heading.
    pub dede_x: f64,
    /// Original minus corrected, perpendicular to the corrected heading.
    pub dede_y: f64,
    pub speed: f64,
    pub dist_to_ego: f64,
}

/// Pairs up `original` with `corrected.corrected` by `(track_id, sample_index)`.
fn match_boxes(
    original: &[BoxAnnotation],
    corrected: &CorrectionResult,
) -> Result<Vec<(usize, usize)>, MetricsError> {
    if original.len() != corrected.corrected.len() {
        return Err(MetricsError::MismatchedBoxes(alloc::format!(
            "{} original vs {} corrected boxes",
            original.len(),
            corrected.corrected.len()
        )));
    }
    let index: BTreeMap<(&str, usize), usize> = corrected
        .corrected
        .iter()
        .enumerate()
        .map(|(i, b)| ((b.track_id.as_str(), b.sample_index), i))
        .collect();
    original
        .iter()
        .enumerate()
        .map(|(i, b)| {
            index
                .get(&(b.track_id.as_str(), b.sample_index))
                .map(|&j| (i, j))
                .ok_or_else(|| {
                    MetricsError::MismatchedBoxes(alloc::format!(
                        "no corrected box for track {} sample {}",
                        b.track_id,
                        b.sample_index
                    ))
                })
        })
        .collect()
}

/// One record per optimized box; passed-through boxes carry no dynamics
/// and are left out.
pub fn compute_error_records(
    original: &[BoxAnnotation],
    corrected: &CorrectionResult,
    ego: &[Pose2],
) -> Result<Vec<ErrorRecord>, MetricsError> {
    let pairs = match_boxes(original, corrected)?;
    let mut out = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let Some(dynamics) = corrected.dynamics[j] else {
            continue;
        };
        let o = &original[i];
        let c = &corrected.corrected[j];
        let Some(ego_pose) = ego.get(c.sample_index) else {
            return Err(MetricsError::MismatchedBoxes(alloc::format!(
                "no ego pose for sample {}",
                c.sample_index
            )));
        };
        let [dx, dy] = [o.pose.x - c.pose.x, o.pose.y - c.pose.y];
        let [hx, hy] = c.pose.heading();
        let dede_x = dx * hx + dy * hy;
        let dede_y = -dx * hy + dy * hx;
        out.push(ErrorRecord {
            track_id: c.track_id.clone(),
            sample_index: c.sample_index,
            ede: libm::hypot(dede_x, dede_y),
            dede_x,
            dede_y,
            speed: dynamics.speed,
            dist_to_ego: c.pose.distance_to(ego_pose),
        });
    }
    Ok(out)
}

/// Keeps records with `|speed| ≥ min_speed`.
pub fn filter_by_speed(records: &[ErrorRecord], min_speed: f64) -> Vec<ErrorRecord> {
    records
        .iter()
        .filter(|r| r.speed.abs() >= min_speed)
        .cloned()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spread {
    pub x: f64,
    pub y: f64,
}

/// Three population standard deviations of DEDE along each axis.
pub fn compute_sdede(records: &[ErrorRecord], min_speed: f64) -> Result<Spread, MetricsError> {
    let kept = filter_by_speed(records, min_speed);
    if kept.len() < 2 {
        return Err(MetricsError::InsufficientData {
            records: kept.len(),
        });
    }
    let xs: Vec<f64> = kept.iter().map(|r| r.dede_x).collect();
    let ys: Vec<f64> = kept.iter().map(|r| r.dede_y).collect();
    Ok(Spread {
        x: 3.0 * population_std(&xs).unwrap_or(0.0),
        y: 3.0 * population_std(&ys).unwrap_or(0.0),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupRow {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// At [`GROUP_PERCENTILES`]; `None` for an empty group.
    pub percentiles: Option<[f64; 5]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupedErrors {
    pub by_speed: Vec<GroupRow>,
    pub by_distance: Vec<GroupRow>,
}

fn group_by(
    records: &[ErrorRecord],
    edges: &[f64],
    key: impl Fn(&ErrorRecord) -> f64,
) -> Vec<GroupRow> {
    let mut buckets: Vec<Vec<f64>> = alloc::vec![Vec::new(); edges.len().saturating_sub(1)];
    for r in records {
        if let Some(i) = bin_index(key(r), edges) {
            buckets[i].push(r.ede);
        }
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, values)| {
            let s = sorted(&values);
            let percentiles = if s.is_empty() {
                None
            } else {
                let mut p = [0.0; 5];
                for (slot, q) in p.iter_mut().zip(GROUP_PERCENTILES) {
                    *slot = percentile_sorted(&s, q).unwrap_or(0.0);
                }
                Some(p)
            };
            GroupRow {
                lo: edges[i],
                hi: edges[i + 1],
                count: s.len(),
                percentiles,
            }
        })
        .collect()
}

fn strictly_increasing(edges: &[f64]) -> bool {
    edges.len() >= 2 && edges.iter().all(|e| e.is_finite()) && edges.windows(2).all(|w| w[1] > w[0])
}

/// EDE percentiles per `|speed|` interval and per distance-to-ego interval.
pub fn group_errors(
    records: &[ErrorRecord],
    speed_edges: &[f64],
    distance_edges: &[f64],
) -> Result<GroupedErrors, MetricsError> {
    if !strictly_increasing(speed_edges) || !strictly_increasing(distance_edges) {
        return Err(MetricsError::InvalidEdges);
    }
    Ok(GroupedErrors {
        by_speed: group_by(records, speed_edges, |r| r.speed.abs()),
        by_distance: group_by(records, distance_edges, |r| r.dist_to_ego),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ipd {
    pub inliers_original: usize,
    pub inliers_corrected: usize,
}

impl Ipd {
    /// `None` when the original boxes hold no compensated points.
    pub fn ratio(&self) -> Option<f64> {
        if self.inliers_original == 0 {
            None
        } else {
            Some(
                (self.inliers_corrected as f64 - self.inliers_original as f64)
                    / self.inliers_original as f64,
            )
        }
    }
}

/// Counts associated points, compensated with the corrected dynamics, that
/// fall inside the corrected and the original footprints. Only optimized
/// boxes with `|speed| ≥ min_speed` contribute.
pub fn compute_ipd(
    scene: &Scene,
    corrected: &CorrectionResult,
    inflation: &InflationParams,
    min_speed: f64,
) -> Result<Ipd, MetricsError> {
    let pairs = match_boxes(&scene.annotations, corrected)?;
    let associated = associate_scene(scene, inflation).map_err(MetricsError::Pipeline)?;
    let mut ipd = Ipd {
        inliers_original: 0,
        inliers_corrected: 0,
    };
    for (i, j) in pairs {
        let Some(state) = corrected.state(j) else {
            continue;
        };
        if state.speed.abs() < min_speed {
            continue;
        }
        let original = &scene.annotations[i];
        for p in &associated.clouds[i] {
            let c = compensate_point(p, &state);
            if footprint_contains(c.xy(), &original.pose, &original.dims) {
                ipd.inliers_original += 1;
            }
            if footprint_contains(c.xy(), &state.pose, &original.dims) {
                ipd.inliers_corrected += 1;
            }
        }
    }
    Ok(ipd)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Random stream for one box, independent of processing order.
pub fn box_rng(seed: u64, track_id: &str, sample_index: usize) -> ChaCha8Rng {
    let key = splitmix64(
        seed ^ splitmix64(fnv1a(track_id.as_bytes())) ^ splitmix64(!(sample_index as u64)),
    );
    ChaCha8Rng::seed_from_u64(key)
}

/// Shifts every moving box by zero-mean Gaussian noise with
/// `σ = spread / 3` along its own heading and lateral axes. A box is moving
/// when its naive finite-difference speed reaches `min_speed`; boxes of
/// single-box tracks never move.
pub fn perturb_annotations(
    annotations: &[BoxAnnotation],
    spread: Spread,
    seed: u64,
    min_speed: f64,
) -> Vec<BoxAnnotation> {
    let mut out = annotations.to_vec();
    if spread.x == 0.0 && spread.y == 0.0 {
        return out;
    }
    let speeds = naive_speeds(annotations);
    let (sx, sy) = (spread.x / 3.0, spread.y / 3.0);
    for b in &mut out {
        let speed = speeds
            .get(&(b.track_id.clone(), b.sample_index))
            .copied()
            .unwrap_or(0.0);
        if speed.abs() < min_speed {
            continue;
        }
        let mut rng = box_rng(seed, &b.track_id, b.sample_index);
        let n1: f64 = StandardNormal.sample(&mut rng);
        let n2: f64 = StandardNormal.sample(&mut rng);
        let [hx, hy] = b.pose.heading();
        let (lon, lat) = (sx * n1, sy * n2);
        b.pose.x += lon * hx - lat * hy;
        b.pose.y += lon * hy + lat * hx;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxDims;
    use crate::pipeline::{Dynamics, TrackDiagnostics};
    use alloc::string::ToString;
    use alloc::vec;
    use core::f64::consts::PI;

    fn boxed(track: &str, sample: usize, x: f64, y: f64, theta: f64) -> BoxAnnotation {
        BoxAnnotation {
            track_id: track.to_string(),
            sample_index: sample,
            timestamp: sample as f64 * 0.1,
            pose: Pose2::new(x, y, theta),
            z: 0.8,
            dims: BoxDims::new(4.0, 2.0, 1.6).unwrap(),
        }
    }

    fn result_from(boxes: Vec<BoxAnnotation>, speed: f64) -> CorrectionResult {
        let n = boxes.len();
        CorrectionResult {
            corrected: boxes,
            dynamics: vec![
                Some(Dynamics {
                    speed,
                    yaw_rate: 0.0,
                    accel: 0.0
                });
                n
            ],
            diagnostics: vec![TrackDiagnostics {
                track_id: "a".to_string(),
                boxes: n,
                initial_cost: Some(1.0),
                final_cost: Some(1.0),
                evaluations: 1,
                skipped: None,
            }],
        }
    }

    fn record(dx: f64, dy: f64, speed: f64) -> ErrorRecord {
        ErrorRecord {
            track_id: "a".to_string(),
            sample_index: 0,
            ede: libm::hypot(dx, dy),
            dede_x: dx,
            dede_y: dy,
            speed,
            dist_to_ego: 10.0,
        }
    }

    #[test]
    fn identical_sets_give_zero_records() {
        let boxes = vec![boxed("a", 0, 1.0, 2.0, 0.3), boxed("a", 1, 2.0, 2.5, 0.3)];
        let r = result_from(boxes.clone(), 10.0);
        let ego = vec![Pose2::new(0.0, 0.0, 0.0); 2];
        for rec in compute_error_records(&boxes, &r, &ego).unwrap() {
            assert_eq!((rec.ede, rec.dede_x, rec.dede_y), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn original_ahead_along_heading() {
        let corrected = vec![boxed("a", 0, 0.0, 0.0, PI / 2.0)];
        let original = vec![boxed("a", 0, 0.0, 1.0, PI / 2.0)];
        let r = result_from(corrected, 10.0);
        let rec = &compute_error_records(&original, &r, &[Pose2::new(3.0, 4.0, 0.0)]).unwrap()[0];
        assert!((rec.dede_x - 1.0).abs() < 1e-12);
        assert!(rec.dede_y.abs() < 1e-12);
        assert!((rec.dist_to_ego - 5.0).abs() < 1e-12);
        assert_eq!(rec.speed, 10.0);
    }

    #[test]
    fn records_match_rotation_oracle() {
        use rand_chacha::rand_core::RngCore;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut u = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for _ in 0..200 {
            let theta = (u() - 0.5) * 2.0 * PI;
            let (dx, dy) = ((u() - 0.5) * 6.0, (u() - 0.5) * 6.0);
            let c = boxed("a", 0, u() * 50.0, u() * 50.0, theta);
            let mut o = c.clone();
            o.pose.x += dx;
            o.pose.y += dy;
            let r = result_from(vec![c], 5.0);
            let rec = &compute_error_records(&[o], &r, &[Pose2::new(0.0, 0.0, 0.0)]).unwrap()[0];
            // Rᵀ(θ)·d
            let (c, s) = (libm::cos(theta), libm::sin(theta));
            assert!((rec.dede_x - (c * dx + s * dy)).abs() < 1e-9);
            assert!((rec.dede_y - (-s * dx + c * dy)).abs() < 1e-9);
            assert!((rec.ede - libm::sqrt(rec.dede_x.powi(2) + rec.dede_y.powi(2))).abs() < 1e-9);
        }
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let r = result_from(vec![boxed("a", 0, 0.0, 0.0, 0.0)], 1.0);
        let err = compute_error_records(
            &[boxed("b", 0, 0.0, 0.0, 0.0)],
            &r,
            &[Pose2::new(0.0, 0.0, 0.0)],
        );
        assert!(matches!(err, Err(MetricsError::MismatchedBoxes(_))));
    }

    #[test]
    fn sdede_edge_cases() {
        let zeros = vec![record(0.0, 0.0, 10.0); 5];
        assert_eq!(
            compute_sdede(&zeros, 3.0).unwrap(),
            Spread { x: 0.0, y: 0.0 }
        );
        let constant = vec![record(0.7, -0.2, 10.0); 5];
        let s = compute_sdede(&constant, 3.0).unwrap();
        assert!(s.x.abs() < 1e-15 && s.y.abs() < 1e-15);
        assert_eq!(
            compute_sdede(&[record(1.0, 0.0, 10.0)], 3.0).unwrap_err(),
            MetricsError::InsufficientData { records: 1 }
        );
        // slow boxes are filtered out
        let mixed = vec![
            record(1.0, 0.0, 10.0),
            record(-1.0, 0.0, 10.0),
            record(50.0, 0.0, 1.0),
        ];
        assert!((compute_sdede(&mixed, 3.0).unwrap().x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sdede_of_gaussian_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let recs: Vec<ErrorRecord> = (0..100_000)
            .map(|_| {
                let n: f64 = StandardNormal.sample(&mut rng);
                record(0.4533 * n, 0.0, 10.0)
            })
            .collect();
        let s = compute_sdede(&recs, 3.0).unwrap();
        assert!((s.x - 1.36).abs() < 0.05 * 1.36, "{}", s.x);
    }

    #[test]
    fn grouping_conventions() {
        let one = group_errors(&[record(0.3, 0.4, 7.0)], &[0.0, 10.0], &[0.0, 50.0]).unwrap();
        assert_eq!(one.by_speed[0].percentiles, Some([0.5; 5]));
        // on an edge: lower bound of the upper bin
        let g = group_errors(&[record(1.0, 0.0, 10.0)], &[0.0, 10.0, 20.0], &[0.0, 50.0]).unwrap();
        assert_eq!(g.by_speed[0].count, 0);
        assert_eq!(g.by_speed[0].percentiles, None);
        assert_eq!(g.by_speed[1].count, 1);
        let last =
            group_errors(&[record(1.0, 0.0, 20.0)], &[0.0, 10.0, 20.0], &[0.0, 50.0]).unwrap();
        assert_eq!(last.by_speed[1].count, 1);
        assert_eq!(
            group_errors(&[], &[0.0, 0.0], &[0.0, 1.0]).unwrap_err(),
            MetricsError::InvalidEdges
        );
    }

    #[test]
    fn grouping_uniform_percentiles() {
        use rand_chacha::rand_core::RngCore;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let recs: Vec<ErrorRecord> = (0..100_000)
            .map(|_| {
                record(
                    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64,
                    0.0,
                    10.0,
                )
            })
            .collect();
        let g = group_errors(&recs, &[0.0, 100.0], &[0.0, 100.0]).unwrap();
        let p = g.by_speed[0].percentiles.unwrap();
        // 2% of the distribution's range
        for (got, want) in p.iter().zip([0.05, 0.25, 0.5, 0.75, 0.95]) {
            assert!((got - want).abs() <= 0.02, "{got} vs {want}");
        }
    }

    #[test]
    fn perturbation_is_deterministic_and_keeps_shape() {
        let boxes: Vec<BoxAnnotation> =
            (0..20).map(|i| boxed("a", i, i as f64, 0.0, 0.0)).collect();
        let a = perturb_annotations(&boxes, Spread { x: 1.36, y: 0.55 }, 42, 3.0);
        let b = perturb_annotations(&boxes, Spread { x: 1.36, y: 0.55 }, 42, 3.0);
        assert_eq!(a, b);
        let c = perturb_annotations(&boxes, Spread { x: 1.36, y: 0.55 }, 43, 3.0);
        assert_ne!(a, c);
        for (p, o) in a.iter().zip(&boxes) {
            assert_eq!(p.pose.theta(), o.pose.theta());
            assert_eq!((p.z, p.dims, p.timestamp), (o.z, o.dims, o.timestamp));
            assert_ne!(p.pose.x, o.pose.x);
        }
        assert_eq!(
            perturb_annotations(&boxes, Spread { x: 0.0, y: 0.0 }, 42, 3.0),
            boxes
        );
        // a parked car stays put
        let parked: Vec<BoxAnnotation> = (0..5).map(|i| boxed("p", i, 1.0, 1.0, 0.0)).collect();
        assert_eq!(
            perturb_annotations(&parked, Spread { x: 1.0, y: 1.0 }, 1, 3.0),
            parked
        );
    }

    #[test]
    fn box_stream_ignores_order() {
        use rand_chacha::rand_core::RngCore;
        let a = box_rng(9, "car", 3).next_u64();
        let _ = box_rng(9, "car", 4).next_u64();
        assert_eq!(a, box_rng(9, "car", 3).next_u64());
        assert_ne!(a, box_rng(9, "cas", 3).next_u64());
    }
}
