//! Quintic (minimum-jerk) reference trajectories through hex-center waypoints.
//!
//! Each segment is a per-axis quintic with zero acceleration at both knots.
//! The path starts with the given initial velocity (zero for a UAV at rest),
//! ends at rest, and passes interior waypoints with a velocity along the
//! bisector of the incoming and outgoing directions, so velocity is
//! continuous across knots. Euler angles and body rates of the reference are
//! zero.

use crate::geometry::Vec2;
use crate::quadrotor::{ground_speed_along, UavState};
use crate::disturbance::WindVector;
use nalgebra::Vector3;

/// Time-sampled reference states with their feed-forward accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<UavState>,
    pub accelerations: Vec<Vector3<f64>>,
    /// Segment index each sample belongs to (the last segment for the final sample).
    pub segment_of: Vec<usize>,
}

impl Trajectory {
    /// Number of sampling periods spanned, one less than the sample count.
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Shape parameters for reference generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryParams {
    pub t_s: f64,
    pub altitude: f64,
    /// Lower bound on a segment's duration.
    pub min_segment_s: f64,
    /// Acceleration budget of the reference, m/s^2. Along-track ramps stay
    /// within it; turns at hex-zigzag knots may reach about 1.7 times it.
    pub max_accel: f64,
}

#[derive(Debug, Clone, Copy)]
struct Quintic {
    c: [Vec2; 6],
    duration: f64,
}

impl Quintic {
    fn new(p0: Vec2, v0: Vec2, p1: Vec2, v1: Vec2, t: f64) -> Self {
        let dp = p1 - p0;
        let t2 = t * t;
        let t3 = t2 * t;
        let c3 = (dp * 20.0 - (v1 * 8.0 + v0 * 12.0) * t) * (1.0 / (2.0 * t3));
        let c4 = (dp * -30.0 + (v1 * 14.0 + v0 * 16.0) * t) * (1.0 / (2.0 * t3 * t));
        let c5 = (dp * 12.0 - (v1 + v0) * (6.0 * t)) * (1.0 / (2.0 * t3 * t2));
        Self { c: [p0, v0, Vec2::ZERO, c3, c4, c5], duration: t }
    }

    fn eval(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        let c = &self.c;
        let p = c[0] + (c[1] + (c[2] + (c[3] + (c[4] + c[5] * t) * t) * t) * t) * t;
        let v = c[1] + (c[2] * 2.0 + (c[3] * 3.0 + (c[4] * 4.0 + c[5] * (5.0 * t)) * t) * t) * t;
        let a = c[2] * 2.0 + (c[3] * 6.0 + (c[4] * 12.0 + c[5] * (20.0 * t)) * t) * t;
        (p, v, a)
    }
}

/// Ground speed for one segment when the craft holds `cruise_airspeed`
/// relative to the air under `wind`, floored at `min_ground_speed` (the
/// floor applies when the headwind would stall progress).
pub fn segment_ground_speed(cruise_airspeed: f64, wind: WindVector, dir: Vec2, min_ground_speed: f64) -> f64 {
    ground_speed_along(cruise_airspeed, wind, dir).map_or(min_ground_speed, |s| s.max(min_ground_speed))
}

/// Samples a reference through `waypoints` every `t_s`.
///
/// `segment_speeds[i]` is the nominal ground speed between waypoints `i` and
/// `i + 1`. A single waypoint yields a single state at rest.
pub fn desirable_states(waypoints: &[Vec2], segment_speeds: &[f64], start_velocity: Vec2, params: &TrajectoryParams) -> Trajectory {
    assert!(!waypoints.is_empty(), "at least one waypoint is required");
    assert_eq!(segment_speeds.len() + 1, waypoints.len(), "one speed per segment");
    let rest = |p: Vec2| UavState::at_rest(p, params.altitude);
    if waypoints.len() == 1 {
        return Trajectory { states: vec![rest(waypoints[0])], accelerations: vec![Vector3::zeros()], segment_of: vec![0] };
    }

    let n_seg = segment_speeds.len();
    let lengths: Vec<f64> = waypoints.windows(2).map(|w| w[0].distance(w[1])).collect();
    let dirs: Vec<Vec2> = waypoints.windows(2).map(|w| (w[1] - w[0]).normalized().unwrap_or(Vec2::ZERO)).collect();
    let a_max = params.max_accel;

    // interior knot speeds: bounded by both segments, the turn and the
    // acceleration budget
    let mut bisectors = vec![Vec2::ZERO; n_seg + 1];
    let mut speed = vec![0.0; n_seg + 1];
    for i in 1..n_seg {
        let (a, b) = (dirs[i - 1], dirs[i]);
        if let Some(bisector) = (a + b).normalized() {
            let half_turn = bisector.angle_between(b);
            let mut cap = segment_speeds[i - 1].min(segment_speeds[i]) * half_turn.cos();
            if half_turn > 1e-9 {
                cap = cap.min((a_max * lengths[i - 1].min(lengths[i]) / (4.0 * half_turn.sin())).sqrt());
            }
            bisectors[i] = bisector;
            speed[i] = cap.max(0.0);
        }
    }
    let budget = 4.0 / 3.0 * a_max;
    speed[0] = start_velocity.norm();
    for i in 1..n_seg {
        speed[i] = speed[i].min((speed[i - 1].powi(2) + budget * lengths[i - 1]).sqrt());
    }
    for i in (1..n_seg).rev() {
        speed[i] = speed[i].min((speed[i + 1].powi(2) + budget * lengths[i]).sqrt());
    }
    let mut knot_vel: Vec<Vec2> = (0..=n_seg).map(|i| bisectors[i] * speed[i]).collect();
    knot_vel[0] = start_velocity;

    let segments: Vec<Quintic> = (0..n_seg)
        .map(|i| {
            let length = lengths[i];
            let nominal = segment_speeds[i].max(1e-6);
            let along_start = knot_vel[i].dot(dirs[i]).max(0.0);
            let along_end = knot_vel[i + 1].dot(dirs[i]).max(0.0);
            // rest-to-rest minimum-jerk peaks at 5.77 L / T^2
            let rest_to_rest = (5.774 * length / a_max).sqrt().max(length / (0.5 * nominal));
            let mut duration = rest_to_rest;
            if along_start + along_end > 0.0 {
                // mean speed (a + b) / 2 gives a monotone smooth step
                duration = duration.min(2.0 * length / (along_start + along_end));
            }
            Quintic::new(waypoints[i], knot_vel[i], waypoints[i + 1], knot_vel[i + 1], duration.max(params.min_segment_s))
        })
        .collect();

    let total: f64 = segments.iter().map(|s| s.duration).sum();
    let steps = ((total / params.t_s) - 1e-9).ceil().max(1.0) as usize;

    let mut states = Vec::with_capacity(steps + 1);
    let mut accelerations = Vec::with_capacity(steps + 1);
    let mut segment_of = Vec::with_capacity(steps + 1);
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    for k in 0..=steps {
        let t = (k as f64 * params.t_s).min(total);
        while seg + 1 < n_seg && t >= seg_start + segments[seg].duration {
            seg_start += segments[seg].duration;
            seg += 1;
        }
        let local = (t - seg_start).clamp(0.0, segments[seg].duration);
        let (p, v, a) = if k == steps {
            (waypoints[n_seg], Vec2::ZERO, Vec2::ZERO)
        } else {
            segments[seg].eval(local)
        };
        states.push(UavState {
            p: Vector3::new(p.x, p.y, params.altitude),
            v: Vector3::new(v.x, v.y, 0.0),
            theta: Vector3::zeros(),
            omega: Vector3::zeros(),
        });
        accelerations.push(Vector3::new(a.x, a.y, 0.0));
        segment_of.push(seg);
    }
    Trajectory { states, accelerations, segment_of }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TrajectoryParams {
        TrajectoryParams { t_s: 0.005, altitude: 0.0, min_segment_s: 0.05, max_accel: 6.0 }
    }

    fn hex_line(n: usize) -> Vec<Vec2> {
        (0..=n).map(|i| Vec2::new(1.5 * i as f64, 3f64.sqrt() / 2.0 * i as f64)).collect()
    }

    #[test]
    fn single_waypoint_is_one_resting_state() {
        let t = desirable_states(&[Vec2::new(1.0, 2.0)], &[], Vec2::ZERO, &params());
        assert_eq!(t.states.len(), 1);
        assert_eq!(t.steps(), 0);
        assert_eq!(t.states[0].v, Vector3::zeros());
    }

    #[test]
    fn endpoints_are_at_rest_and_exact() {
        let wps = vec![Vec2::new(0.0, 0.0), Vec2::new(1.5, 0.866), Vec2::new(3.0, 0.0), Vec2::new(3.0, -1.732)];
        let t = desirable_states(&wps, &[4.0, 4.0, 3.0], Vec2::ZERO, &params());
        let first = t.states.first().unwrap();
        let last = t.states.last().unwrap();
        assert_eq!(first.v.norm(), 0.0);
        assert_eq!(last.v.norm(), 0.0);
        assert!((first.p.xy() - Vector3::new(0.0, 0.0, 0.0).xy()).norm() < 1e-9);
        assert!((last.p.x - 3.0).abs() < 1e-9 && (last.p.y + 1.732).abs() < 1e-9);
        assert!(t.states.iter().all(|s| s.theta == Vector3::zeros() && s.omega == Vector3::zeros()));
    }

    #[test]
    fn quintic_hits_knots() {
        let q = Quintic::new(Vec2::new(1.0, 2.0), Vec2::new(0.5, -1.0), Vec2::new(4.0, 3.0), Vec2::new(2.0, 0.0), 1.7);
        let (p, v, a) = q.eval(1.7);
        assert!((p - Vec2::new(4.0, 3.0)).norm() < 1e-9);
        assert!((v - Vec2::new(2.0, 0.0)).norm() < 1e-9);
        assert!(a.norm() < 1e-9);
        let (p0, v0, a0) = q.eval(0.0);
        assert_eq!((p0, v0, a0), (Vec2::new(1.0, 2.0), Vec2::new(0.5, -1.0), Vec2::ZERO));
    }

    #[test]
    fn velocity_is_continuous_across_knots() {
        let wps = vec![Vec2::ZERO, Vec2::new(1.5, 0.866), Vec2::new(3.0, 0.0), Vec2::new(4.5, 0.866)];
        let t = desirable_states(&wps, &[4.0; 3], Vec2::ZERO, &params());
        let max_jump = t.states.windows(2).map(|w| (w[1].v - w[0].v).norm()).fold(0.0, f64::max);
        let max_acc = t.accelerations.iter().map(|a| a.norm()).fold(0.0, f64::max);
        assert!(max_jump <= max_acc * 0.005 * 1.01 + 1e-12, "{max_jump} vs {max_acc}");
    }

    #[test]
    fn long_straight_path_reaches_nominal_speed() {
        let wps = hex_line(12);
        let t = desirable_states(&wps, &[4.0; 12], Vec2::ZERO, &params());
        let peak = t.states.iter().map(|s| s.v.norm()).fold(0.0, f64::max);
        assert!((peak - 4.0).abs() < 1e-6, "{peak}");
    }

    #[test]
    fn acceleration_stays_within_budget() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let steps = [(1.5, 0.866), (0.0, 1.732), (-1.5, 0.866), (-1.5, -0.866), (0.0, -1.732), (1.5, -0.866)];
        for _ in 0..200 {
            let n = rng.gen_range(1..15);
            let mut wps = vec![Vec2::ZERO];
            let mut dir = rng.gen_range(0..6usize);
            for _ in 0..n {
                dir = (dir + [0usize, 1, 5][rng.gen_range(0..3)]) % 6;
                let last = *wps.last().unwrap();
                wps.push(last + Vec2::new(steps[dir].0, steps[dir].1));
            }
            let nominal = rng.gen_range(1.0..20.0);
            let t = desirable_states(&wps, &vec![nominal; n], Vec2::ZERO, &params());
            let peak_acc = t.accelerations.iter().map(|a| a.norm()).fold(0.0, f64::max);
            let peak_v = t.states.iter().map(|s| s.v.norm()).fold(0.0, f64::max);
            assert!(peak_acc <= 6.0 * 1.75, "{peak_acc} with {wps:?}");
            assert!(peak_v <= nominal * 1.05 + 1e-9, "{peak_v} vs {nominal}");
        }
    }

    #[test]
    fn ground_speed_floor_applies() {
        let dir = Vec2::new(1.0, 0.0);
        assert_eq!(segment_ground_speed(4.0, Vec2::new(-8.0, 0.0), dir, 0.5), 0.5);
        assert!((segment_ground_speed(4.0, Vec2::new(2.0, 0.0), dir, 0.5) - 6.0).abs() < 1e-12);
    }
}
