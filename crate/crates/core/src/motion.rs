//! Constant turn rate and acceleration (CTRA) kinematics.
//!
//! The state moves along its heading with speed `s(t) = s + a·t` while the
//! heading turns at a constant rate `ω`. The closed-form displacement is
//! evaluated in the frame of the initial heading, which keeps the expression
//! free of the `1/ω²` cancellation for small turn rates.

use crate::geometry::{angle_diff, Pose2};
use crate::scene::TimedPoint;

/// Below this yaw rate (rad/s) the first-order series in `ω` is used.
pub const OMEGA_EPS: f64 = 1e-4;

/// Pose and dynamics of a box at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackState {
    pub pose: Pose2,
    /// Signed speed along the box x-axis (m/s).
    pub speed: f64,
    /// rad/s
    pub yaw_rate: f64,
    /// Signed acceleration along the box x-axis (m/s²).
    pub accel: f64,
}

impl TrackState {
    pub fn new(x: f64, y: f64, theta: f64, speed: f64, yaw_rate: f64, accel: f64) -> Self {
        Self {
            pose: Pose2::new(x, y, theta),
            speed,
            yaw_rate,
            accel,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.pose.x,
            self.pose.y,
            self.pose.theta(),
            self.speed,
            self.yaw_rate,
            self.accel,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Change of the full state over one interval. Turn rate and acceleration
/// never change under CTRA, so their components are always zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDelta {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
    pub ds: f64,
    pub domega: f64,
    pub da: f64,
}

// sin φ / φ
fn sinc(phi: f64) -> f64 {
    if phi.abs() < 1e-2 {
        let p2 = phi * phi;
        1.0 - p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0))
    } else {
        libm::sin(phi) / phi
    }
}

// (1 − cos φ) / φ
fn cosc(phi: f64) -> f64 {
    if phi.abs() < 1e-2 {
        let p2 = phi * phi;
        phi / 2.0 * (1.0 - p2 / 12.0 * (1.0 - p2 / 30.0 * (1.0 - p2 / 56.0)))
    } else {
        (1.0 - libm::cos(phi)) / phi
    }
}

// sin φ / φ + (cos φ − 1) / φ²  =  ∫₀¹ τ cos(φτ) dτ
fn ramp_cos(phi: f64) -> f64 {
    if phi.abs() < 1e-2 {
        let p2 = phi * phi;
        0.5 - p2 / 8.0 + p2 * p2 / 144.0 - p2 * p2 * p2 / 5760.0
    } else {
        libm::sin(phi) / phi + (libm::cos(phi) - 1.0) / (phi * phi)
    }
}

// (sin φ − φ cos φ) / φ²  =  ∫₀¹ τ sin(φτ) dτ
fn ramp_sin(phi: f64) -> f64 {
    if phi.abs() < 1e-2 {
        let p2 = phi * phi;
        phi / 3.0 - phi * p2 / 30.0 + phi * p2 * p2 / 840.0 - phi * p2 * p2 * p2 / 45360.0
    } else {
        (libm::sin(phi) - phi * libm::cos(phi)) / (phi * phi)
    }
}

/// Displacement in the frame of the initial heading: (forward, leftward).
fn body_displacement(state: &TrackState, dt: f64) -> (f64, f64) {
    let (s, w, a) = (state.speed, state.yaw_rate, state.accel);
    if w.abs() < OMEGA_EPS {
        let forward = s * dt + 0.5 * a * dt * dt;
        let lateral = w * (0.5 * s * dt * dt + a * dt * dt * dt / 3.0);
        (forward, lateral)
    } else {
        let phi = w * dt;
        let forward = s * dt * sinc(phi) + a * dt * dt * ramp_cos(phi);
        let lateral = s * dt * cosc(phi) + a * dt * dt * ramp_sin(phi);
        (forward, lateral)
    }
}

/// State change over `dt` seconds; `dt` may be negative.
pub fn ctra_delta(state: &TrackState, dt: f64) -> StateDelta {
    let (forward, lateral) = body_displacement(state, dt);
    let [c, s] = state.pose.heading();
    StateDelta {
        dx: c * forward - s * lateral,
        dy: s * forward + c * lateral,
        dtheta: state.yaw_rate * dt,
        ds: state.accel * dt,
        domega: 0.0,
        da: 0.0,
    }
}

pub fn ctra_predict(state: &TrackState, dt: f64) -> TrackState {
    let d = ctra_delta(state, dt);
    TrackState {
        pose: Pose2::new(
            state.pose.x + d.dx,
            state.pose.y + d.dy,
            state.pose.theta() + d.dtheta,
        ),
        speed: state.speed + d.ds,
        yaw_rate: state.yaw_rate,
        accel: state.accel,
    }
}

/// `actual − predicted` per component, with the heading difference wrapped.
pub fn ctra_residual(predicted: &TrackState, actual: &TrackState) -> [f64; 6] {
    [
        actual.pose.x - predicted.pose.x,
        actual.pose.y - predicted.pose.y,
        angle_diff(actual.pose.theta(), predicted.pose.theta()),
        actual.speed - predicted.speed,
        actual.yaw_rate - predicted.yaw_rate,
        actual.accel - predicted.accel,
    ]
}

/// Moves a detection from its capture time back to the reference time of
/// `state`, by removing the object's displacement over `point.dt`.
pub fn compensate_point(point: &TimedPoint, state: &TrackState) -> TimedPoint {
    if point.dt == 0.0 {
        return *point;
    }
    let d = ctra_delta(state, point.dt);
    TimedPoint {
        x: point.x - d.dx,
        y: point.y - d.dy,
        z: point.z,
        dt: point.dt,
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{from_box_frame, to_box_frame, BoxDims, NormalizedBoxCoords};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    #[test]
    fn uniform_rectilinear() {
        let s = ctra_predict(&TrackState::new(0.0, 0.0, 0.0, 10.0, 0.0, 0.0), 0.1);
        assert!((s.pose.x - 1.0).abs() < 1e-15);
        assert_eq!(s.pose.y, 0.0);
        assert_eq!(s.pose.theta(), 0.0);
        assert_eq!(s.speed, 10.0);
    }

    #[test]
    fn constant_acceleration_from_rest() {
        let s = ctra_predict(&TrackState::new(0.0, 0.0, 0.0, 0.0, 0.0, 2.0), 1.0);
        assert!((s.pose.x - 1.0).abs() < 1e-15);
        assert_eq!(s.pose.y, 0.0);
        assert_eq!(s.speed, 2.0);
    }

    #[test]
    fn curved_case_matches_rk4() {
        let x0 = TrackState::new(0.0, 0.0, 0.0, 10.0, 0.5, 1.0);
        let got = ctra_predict(&x0, 0.2);
        let want = oracle::rk4(&x0, 0.2, 1e-5);
        assert!((got.pose.x - want[0]).abs() < 1e-8);
        assert!((got.pose.y - want[1]).abs() < 1e-8);
        assert!((got.pose.theta() - want[2]).abs() < 1e-10);
        assert!((got.speed - want[3]).abs() < 1e-10);
    }

    #[test]
    fn residual_wraps_heading() {
        let a = TrackState::new(0.0, 0.0, 3.1, 0.0, 0.0, 0.0);
        let b = TrackState::new(0.0, 0.0, -3.1, 0.0, 0.0, 0.0);
        let r = ctra_residual(&a, &b);
        assert!((r[2] - (2.0 * PI - 6.2)).abs() < 1e-12);
        assert!((r[2] - 0.0832).abs() < 1e-4);
        assert_eq!(ctra_residual(&a, &a), [0.0; 6]);
    }

    #[test]
    fn compensation_examples() {
        let state = TrackState::new(5.0, 1.0, 0.0, 10.0, 0.0, 0.0);
        let p = TimedPoint::new(7.0, 1.0, 0.5, 0.0);
        assert_eq!(compensate_point(&p, &state), p);
        let p = TimedPoint::new(7.0, 1.0, 0.5, 0.03);
        let c = compensate_point(&p, &state);
        assert!((c.x - 6.7).abs() < 1e-12);
        assert_eq!(c.y, 1.0);
        assert_eq!(c.z, 0.5);
    }

    #[test]
    fn rigidly_attached_point_round_trip() {
        // the detection rides along with the box reference point
        let state = TrackState::new(3.0, -2.0, 0.3, 15.0, 0.3, 0.5);
        let dims = BoxDims::new(4.5, 1.9, 1.5).unwrap();
        let local = NormalizedBoxCoords { u: 1.0, v: 0.3 };
        let dt = 0.05;
        let on_face = from_box_frame(local, &state.pose, &dims);
        let d = ctra_delta(&state, dt);
        let captured = TimedPoint::new(on_face[0] + d.dx, on_face[1] + d.dy, 0.7, dt);
        let c = compensate_point(&captured, &state);
        assert!((c.x - on_face[0]).abs() < 1e-9 && (c.y - on_face[1]).abs() < 1e-9);
        let back = to_box_frame([c.x, c.y], &state.pose, &dims);
        assert!((back.u - 1.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_continuity() {
        for &(s, a, dt) in &[
            (40.0, 20.0, 0.5),
            (-40.0, 20.0, -0.5),
            (40.0, -20.0, 0.5),
            (1.0, 0.0, 0.1),
        ] {
            let mut st = TrackState::new(0.0, 0.0, 0.8, s, OMEGA_EPS, a);
            let exact = ctra_predict(&st, dt);
            st.yaw_rate = OMEGA_EPS * (1.0 - 1e-12);
            let limit = ctra_predict(&st, dt);
            assert!((exact.pose.x - limit.pose.x).abs() <= 1e-6);
            assert!((exact.pose.y - limit.pose.y).abs() <= 1e-6);
        }
    }

    proptest! {
        #[test]
        fn composition_is_exact(
            x in -100.0..100.0f64, y in -100.0..100.0f64, th in -3.1..3.1f64,
            s in -40.0..40.0f64, w in -0.4..0.4f64, a in -20.0..20.0f64,
            t1 in -0.5..0.5f64, t2 in -0.5..0.5f64,
        ) {
            let x0 = TrackState::new(x, y, th, s, w, a);
            let two = ctra_predict(&ctra_predict(&x0, t1), t2);
            let one = ctra_predict(&x0, t1 + t2);
            prop_assert!((two.pose.x - one.pose.x).abs() < 1e-9);
            prop_assert!((two.pose.y - one.pose.y).abs() < 1e-9);
            prop_assert!(angle_diff(two.pose.theta(), one.pose.theta()).abs() < 1e-12);
            prop_assert!((two.speed - one.speed).abs() < 1e-9);
        }

        #[test]
        fn residual_antisymmetric(
            a in proptest::array::uniform6(-10.0..10.0f64),
            b in proptest::array::uniform6(-10.0..10.0f64),
        ) {
            let (a, b) = (TrackState::from_array(a), TrackState::from_array(b));
            let r1 = ctra_residual(&a, &b);
            let r2 = ctra_residual(&b, &a);
            for i in 0..6 {
                if i == 2 && (r1[2].abs() - PI).abs() < 1e-12 {
                    continue;
                }
                prop_assert!((r1[i] + r2[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn backward_consistency(
            th in -3.1..3.1f64, s in -40.0..40.0f64, w in -0.4..0.4f64,
            a in -20.0..20.0f64, dt in -0.05..0.05f64,
            px in -50.0..50.0f64, py in -50.0..50.0f64,
        ) {
            let st = TrackState::new(1.0, 2.0, th, s, w, a);
            let p = TimedPoint::new(px, py, 0.0, dt);
            let c = compensate_point(&p, &st);
            let capture = ctra_predict(&st, dt);
            let back = ctra_delta(&capture, -dt);
            prop_assert!((c.x - (px + back.dx)).abs() < 1e-9);
            prop_assert!((c.y - (py + back.dy)).abs() < 1e-9);
        }

        #[test]
        fn attached_points_return_to_reference(
            th in -3.1..3.1f64, s in -40.0..40.0f64, w in -PI / 8.0..PI / 8.0,
            a in -20.0..20.0f64, dt in -0.05..0.05f64,
            u in 0.0..1.0f64, v in 0.0..1.0f64,
        ) {
            let st = TrackState::new(-20.0, 30.0, th, s, w, a);
            let dims = BoxDims::new(4.5, 1.9, 1.5).unwrap();
            let on_box = from_box_frame(NormalizedBoxCoords { u, v }, &st.pose, &dims);
            let cap = ctra_predict(&st, dt);
            let p = [on_box[0] + cap.pose.x - st.pose.x, on_box[1] + cap.pose.y - st.pose.y];
            let c = compensate_point(&TimedPoint::new(p[0], p[1], 0.0, dt), &st);
            prop_assert!((c.x - on_box[0]).abs() < 1e-9);
            prop_assert!((c.y - on_box[1]).abs() < 1e-9);
        }
    }
}
