//! Planar poses and box footprints.

use alloc::string::String;
use core::f64::consts::{PI, TAU};
use core::fmt;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let a = libm::remainder(theta, TAU);
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

/// Shortest signed angular distance `to - from`, in `(-π, π]`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    wrap_angle(to - from)
}

/// Position and yaw in the global frame. The yaw is kept in `(-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = wrap_angle(theta);
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Unit vector along the box x-axis.
    pub fn heading(&self) -> [f64; 2] {
        [libm::cos(self.theta), libm::sin(self.theta)]
    }

    /// Unit vector along the box y-axis (to the left of the heading).
    pub fn lateral(&self) -> [f64; 2] {
        [-libm::sin(self.theta), libm::cos(self.theta)]
    }

    /// `self ∘ other`: `other` expressed in this pose's frame, mapped to global.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let [c, s] = self.heading();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    /// Maps a point given in this pose's local frame to the global frame.
    pub fn transform_point(&self, local: [f64; 2]) -> [f64; 2] {
        let [c, s] = self.heading();
        [
            self.x + c * local[0] - s * local[1],
            self.y + s * local[0] + c * local[1],
        ]
    }

    /// Maps a global point into this pose's local frame.
    pub fn inverse_transform_point(&self, global: [f64; 2]) -> [f64; 2] {
        let [c, s] = self.heading();
        let dx = global[0] - self.x;
        let dy = global[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn distance_to(&self, other: &Pose2) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryError {
    NonPositiveDimension { name: &'static str, value: f64 },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NonPositiveDimension { name, value } => {
                write!(f, "box {name} must be finite and > 0, got {value}")
            }
        }
    }
}

impl core::error::Error for GeometryError {}

/// Length (along the box x-axis), width and height, all strictly positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDims {
    length: f64,
    width: f64,
    height: f64,
}

impl BoxDims {
    pub fn new(length: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        for (name, value) in [("length", length), ("width", width), ("height", height)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::NonPositiveDimension { name, value });
            }
        }
        Ok(Self {
            length,
            width,
            height,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }
}

/// One annotated box of one track at one annotation sample.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxAnnotation {
    pub track_id: String,
    pub sample_index: usize,
    pub timestamp: f64,
    pub pose: Pose2,
    /// Centroid height in the global frame.
    pub z: f64,
    pub dims: BoxDims,
}

/// Position of a point relative to a box footprint.
///
/// `u` runs along the heading from the rear face (0) to the front face (1);
/// `v` runs along the lateral axis from the right face (0) to the left face
/// (1). The point is inside the footprint iff both lie in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedBoxCoords {
    pub u: f64,
    pub v: f64,
}

impl NormalizedBoxCoords {
    pub fn is_inside(&self) -> bool {
        (0.0..=1.0).contains(&self.u) && (0.0..=1.0).contains(&self.v)
    }

    /// Signed normalized distance to the closest footprint face; negative outside.
    pub fn face_margin(&self) -> f64 {
        self.u.min(self.v).min(1.0 - self.u).min(1.0 - self.v)
    }
}

pub fn to_box_frame(point_xy: [f64; 2], pose: &Pose2, dims: &BoxDims) -> NormalizedBoxCoords {
    let [lon, lat] = pose.inverse_transform_point(point_xy);
    NormalizedBoxCoords {
        u: (lon + 0.5 * dims.length) / dims.length,
        v: (lat + 0.5 * dims.width) / dims.width,
    }
}

/// Inverse of [`to_box_frame`].
pub fn from_box_frame(coords: NormalizedBoxCoords, pose: &Pose2, dims: &BoxDims) -> [f64; 2] {
    pose.transform_point([
        (coords.u - 0.5) * dims.length,
        (coords.v - 0.5) * dims.width,
    ])
}

/// Footprint membership; boundary points are inside.
pub fn footprint_contains(point_xy: [f64; 2], pose: &Pose2, dims: &BoxDims) -> bool {
    to_box_frame(point_xy, pose, dims).is_inside()
}

/// Footprint membership plus a height test against
/// `[z - H/2 + z_bottom_offset, z + H/2]`.
pub fn volume_contains(
    point: [f64; 3],
    pose: &Pose2,
    z: f64,
    dims: &BoxDims,
    z_bottom_offset: f64,
) -> bool {
    let half_h = 0.5 * dims.height;
    let in_height = point[2] >= z - half_h + z_bottom_offset && point[2] <= z + half_h;
    in_height && footprint_contains([point[0], point[1]], pose, dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(l: f64, w: f64, h: f64) -> BoxDims {
        BoxDims::new(l, w, h).unwrap()
    }

    /// Four half-plane tests written directly from the box corners.
    fn half_plane_inside(p: [f64; 2], pose: &Pose2, d: &BoxDims) -> bool {
        let c = libm::cos(pose.theta());
        let s = libm::sin(pose.theta());
        let (hl, hw) = (d.length() / 2.0, d.width() / 2.0);
        let corner = |lx: f64, ly: f64| [pose.x + c * lx - s * ly, pose.y + s * lx + c * ly];
        let quad = [
            corner(-hl, -hw),
            corner(hl, -hw),
            corner(hl, hw),
            corner(-hl, hw),
        ];
        (0..4).all(|i| {
            let a = quad[i];
            let b = quad[(i + 1) % 4];
            // counter-clockwise winding: inside is to the left of each edge
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            cross >= -1e-9
        })
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - TAU)).abs() < 1e-12);
    }

    #[test]
    fn angle_diff_wraps_through_pi() {
        let d = angle_diff(-3.1, 3.1);
        assert!((d - (TAU - 6.2)).abs() < 1e-12);
    }

    #[test]
    fn box_dims_reject_non_positive() {
        assert!(BoxDims::new(0.0, 1.0, 1.0).is_err());
        assert!(BoxDims::new(1.0, -1.0, 1.0).is_err());
        assert!(BoxDims::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn center_maps_to_half() {
        let d = dims(4.5, 1.9, 1.6);
        for theta in [-3.0, -1.0, 0.0, 0.4, 2.5] {
            let pose = Pose2::new(12.0, -7.0, theta);
            let c = to_box_frame([12.0, -7.0], &pose, &d);
            assert!((c.u - 0.5).abs() < 1e-12 && (c.v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn front_face_midline() {
        let c = to_box_frame([2.0, 0.0], &Pose2::new(0.0, 0.0, 0.0), &dims(4.0, 2.0, 1.0));
        assert_eq!(c, NormalizedBoxCoords { u: 1.0, v: 0.5 });
    }

    #[test]
    fn rotated_box_side_face() {
        // R(π/2)ᵀ·((2,1) − (1,1)) = (0, −1): mid-length, on the right face.
        let c = to_box_frame(
            [2.0, 1.0],
            &Pose2::new(1.0, 1.0, PI / 2.0),
            &dims(4.0, 2.0, 1.0),
        );
        assert!((c.u - 0.5).abs() < 1e-12);
        assert!(c.v.abs() < 1e-12);
    }

    #[test]
    fn footprint_examples() {
        let pose = Pose2::new(0.0, 0.0, 0.0);
        let d = dims(4.0, 2.0, 1.5);
        assert!(footprint_contains([0.0, 0.0], &pose, &d));
        assert!(footprint_contains([2.0, 1.0], &pose, &d));
        assert!(!footprint_contains([2.01, 0.0], &pose, &d));
    }

    #[test]
    fn volume_height_rule() {
        let pose = Pose2::new(0.0, 0.0, 0.0);
        let d = dims(4.0, 2.0, 2.0);
        assert!(volume_contains([0.0, 0.0, 1.0], &pose, 1.0, &d, 0.0));
        // box bottom at z=0; a point 0.1 m above it is cut by the 0.2 m deflation
        assert!(!volume_contains([0.0, 0.0, 0.1], &pose, 1.0, &d, 0.2));
        assert!(volume_contains([0.0, 0.0, 0.1], &pose, 1.0, &d, 0.0));
        assert!(volume_contains([0.0, 0.0, 2.0], &pose, 1.0, &d, 0.2));
        assert!(!volume_contains(
            [0.0, 0.0, 2.0 + 1e-9],
            &pose,
            1.0,
            &d,
            0.2
        ));
    }

    #[test]
    fn footprint_matches_half_planes_on_random_points() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let pose = Pose2::new(3.0, -2.0, 0.7);
        let d = dims(4.6, 1.9, 1.5);
        for _ in 0..10_000 {
            let p = [3.0 + (unit() - 0.5) * 8.0, -2.0 + (unit() - 0.5) * 8.0];
            assert_eq!(
                footprint_contains(p, &pose, &d),
                half_plane_inside(p, &pose, &d),
                "{p:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn placement_round_trip(
            x in -1e4..1e4f64, y in -1e4..1e4f64, theta in -4.0..4.0f64,
            u in -1.0..2.0f64, v in -1.0..2.0f64,
            l in 0.5..20.0f64, w in 0.5..4.0f64,
        ) {
            let pose = Pose2::new(x, y, theta);
            let d = dims(l, w, 1.0);
            let p = from_box_frame(NormalizedBoxCoords { u, v }, &pose, &d);
            let back = to_box_frame(p, &pose, &d);
            prop_assert!(((back.u - u) * l).abs() < 1e-9);
            prop_assert!(((back.v - v) * w).abs() < 1e-9);
        }

        #[test]
        fn containment_is_rigid_invariant(
            px in -10.0..10.0f64, py in -10.0..10.0f64,
            bx in -3.0..3.0f64, by in -3.0..3.0f64, bt in -3.0..3.0f64,
            tx in -100.0..100.0f64, ty in -100.0..100.0f64, tt in -3.0..3.0f64,
        ) {
            let d = dims(4.0, 2.0, 1.5);
            let pose = Pose2::new(bx, by, bt);
            let before = to_box_frame([px, py], &pose, &d);
            // skip points within rounding distance of an edge
            prop_assume!(before.face_margin().abs() > 1e-9);
            let t = Pose2::new(tx, ty, tt);
            let moved_pose = t.compose(&pose);
            let moved_point = t.transform_point([px, py]);
            prop_assert_eq!(
                footprint_contains([px, py], &pose, &d),
                footprint_contains(moved_point, &moved_pose, &d)
            );
        }

        #[test]
        fn theta_always_wrapped(t in -1e3..1e3f64, s in -1e3..1e3f64) {
            let a = Pose2::new(0.0, 0.0, t);
            prop_assert!(a.theta() > -PI && a.theta() <= PI);
            let b = a.compose(&Pose2::new(1.0, 2.0, s));
            prop_assert!(b.theta() > -PI && b.theta() <= PI);
        }
    }
}
