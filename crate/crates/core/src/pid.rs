//! Decoupled position/attitude controller and the energy predictions built
//! on it.
//!
//! The position loop turns the reference into a commanded acceleration
//! `a = a_ref + Kd (v_ref - v) + Kp (p_ref - p)`; adding gravity and
//! feed-forward drag gives a desired world-frame force whose direction sets
//! roll and pitch (yaw is held at zero) and whose projection on the current
//! body z axis is the thrust. The attitude loop has the same PD structure and
//! produces the body moments. Every command is clamped to what the rotors can
//! deliver.

use crate::astar::{desirable_states, segment_ground_speed, DesirablePath, PlannerConfig, Trajectory};
use crate::disturbance::{best_case_wind, worst_case_wind, WindVector};
use crate::geometry::Vec2;
use crate::quadrotor::{clamp_to_realizable, rotor_power, step_dynamics, CraftParams, EnergyJ, InputVector, QuadError, UavState};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gain matrices of both loops. All four must be symmetric positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: Matrix3<f64>,
    pub kd: Matrix3<f64>,
    pub kp_att: Matrix3<f64>,
    pub kd_att: Matrix3<f64>,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: Matrix3::identity() * 4.0,
            kd: Matrix3::identity() * 4.0,
            kp_att: Matrix3::identity() * 100.0,
            kd_att: Matrix3::identity() * 20.0,
        }
    }
}

impl PidGains {
    pub fn is_valid(&self) -> bool {
        [self.kp, self.kd, self.kp_att, self.kd_att].iter().all(is_spd)
    }
}

fn is_spd(m: &Matrix3<f64>) -> bool {
    let symmetric = (m - m.transpose()).abs().max() <= 1e-12 * m.abs().max().max(1.0);
    symmetric && m.cholesky().is_some()
}

/// Controller gains plus the limits applied to the desired attitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidController {
    pub gains: PidGains,
    /// Largest commanded tilt from vertical, radians.
    pub max_tilt: f64,
}

impl Default for PidController {
    fn default() -> Self {
        Self { gains: PidGains::default(), max_tilt: 0.8 }
    }
}

/// One control decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Realized input after clamping.
    pub input: InputVector,
    pub rotor_speeds: [f64; 4],
    pub saturated: bool,
}

impl PidController {
    /// Input that steers `x` toward `target` under wind `d`.
    pub fn command(&self, x: &UavState, target: &ReferencePoint, d: WindVector, params: &CraftParams) -> ControlOutput {
        let g = &self.gains;
        let acc = target.acc + g.kd * (target.state.v - x.v) + g.kp * (target.state.p - x.p);
        let force = self.desired_force(&acc, &x.v, d, params);
        let att_cmd = attitude_of(&force);

        let (sr, cr) = x.theta.x.sin_cos();
        let (sp, cp) = x.theta.y.sin_cos();
        let (sy, cy) = x.theta.z.sin_cos();
        let body_z = Vector3::new(cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr);
        let thrust = force.dot(&body_z).max(0.0);

        let mut att_err = att_cmd - x.theta;
        att_err.z = wrap_angle(att_err.z);
        let j = params.inertia();
        let ang_acc = g.kd_att * (target.att_rate - x.omega) + g.kp_att * att_err;
        let moments = j.component_mul(&ang_acc) + x.omega.cross(&j.component_mul(&x.omega));

        let demanded = InputVector::new(thrust, moments.x, moments.y, moments.z);
        let (input, rotor_speeds, saturated) = clamp_to_realizable(&demanded, params);
        ControlOutput { input, rotor_speeds, saturated }
    }

    /// World-frame force giving acceleration `acc` at velocity `v`, with the
    /// vertical part floored and the tilt limited.
    fn desired_force(&self, acc: &Vector3<f64>, v: &Vector3<f64>, d: WindVector, params: &CraftParams) -> Vector3<f64> {
        let v_rel = v - Vector3::new(d.x, d.y, 0.0);
        let mut force = params.mass_kg * (acc + Vector3::new(0.0, 0.0, params.gravity)) + params.drag_factor() * v_rel.norm() * v_rel;
        force.z = force.z.max(0.1 * params.weight());
        let horizontal = force.xy().norm();
        let tilt_limit = force.z * self.max_tilt.tan();
        if horizontal > tilt_limit {
            let scale = tilt_limit / horizontal;
            force.x *= scale;
            force.y *= scale;
        }
        force
    }

    /// Reference samples with attitude-rate feed-forward. The attitude a
    /// perfectly tracking craft would hold is differenced along the
    /// reference; `wind_at(i)` is the wind assumed at sample `i`.
    pub fn reference_points<W>(&self, reference: &Trajectory, wind_at: W, params: &CraftParams, t_s: f64) -> Vec<ReferencePoint>
    where
        W: Fn(usize) -> WindVector,
    {
        let n = reference.states.len();
        let att: Vec<Vector3<f64>> = (0..n)
            .map(|i| attitude_of(&self.desired_force(&reference.accelerations[i], &reference.states[i].v, wind_at(i), params)))
            .collect();
        (0..n)
            .map(|i| {
                let prev = att[i.saturating_sub(1)];
                let next = att[(i + 1).min(n - 1)];
                let span = ((i + 1).min(n - 1) - i.saturating_sub(1)) as f64;
                // the last sample is held once the reference runs out
                let att_rate = if span > 0.0 && i + 1 < n { (next - prev) / (span * t_s) } else { Vector3::zeros() };
                ReferencePoint { state: reference.states[i], acc: reference.accelerations[i], att_rate }
            })
            .collect()
    }
}

/// Roll and pitch that point the body z axis along `force`, yaw zero.
fn attitude_of(force: &Vector3<f64>) -> Vector3<f64> {
    let roll = (-force.y / force.norm()).clamp(-1.0, 1.0).asin();
    let pitch = force.x.atan2(force.z);
    Vector3::new(roll, pitch, 0.0)
}

/// One reference sample as the controller consumes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub state: UavState,
    pub acc: Vector3<f64>,
    pub att_rate: Vector3<f64>,
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Closed-loop rollout of the controller along a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// One input per sampling period, one fewer than the reference states.
    pub inputs: Vec<InputVector>,
    /// Predicted states, starting at `x0`.
    pub states: Vec<UavState>,
    pub saturated: Vec<bool>,
    pub energy: EnergyJ,
}

impl Prediction {
    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Tracks `reference` from `x0`, applying wind `wind_at(k)` during step `k`.
///
/// The input at step `k` is computed from the predicted state at `k` and the
/// reference at `k + 1`.
pub fn predict_inputs<W>(
    reference: &Trajectory,
    x0: &UavState,
    wind_at: W,
    controller: &PidController,
    params: &CraftParams,
    t_s: f64,
) -> Result<Prediction, QuadError>
where
    W: Fn(usize) -> WindVector,
{
    let n = reference.steps();
    let mut inputs = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n + 1);
    let mut saturated = Vec::with_capacity(n);
    let mut energy = 0.0;
    let mut x = *x0;
    let points = controller.reference_points(reference, |i| wind_at(i.saturating_sub(1)), params, t_s);
    states.push(x);
    for k in 0..n {
        let d = wind_at(k);
        let out = controller.command(&x, &points[k + 1], d, params);
        energy += rotor_power(&out.rotor_speeds, params) * t_s;
        x = step_dynamics(&x, &out.input, d, params, t_s)?;
        inputs.push(out.input);
        saturated.push(out.saturated);
        states.push(x);
    }
    Ok(Prediction { inputs, states, saturated, energy: EnergyJ::new(energy) })
}

/// Predicted, worst-case and best-case energy to follow one waypoint path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTriple {
    pub predicted: EnergyJ,
    pub max: EnergyJ,
    pub min: EnergyJ,
}

impl EnergyTriple {
    pub const INFEASIBLE: EnergyTriple = EnergyTriple { predicted: EnergyJ::INFEASIBLE, max: EnergyJ::INFEASIBLE, min: EnergyJ::INFEASIBLE };
    pub const ZERO: EnergyTriple = EnergyTriple { predicted: EnergyJ::ZERO, max: EnergyJ::ZERO, min: EnergyJ::ZERO };

    pub fn is_ordered(&self) -> bool {
        self.min <= self.predicted && self.predicted <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Worst,
    Best,
}

/// Energy triple for `path`. The predicted value tracks the path's own
/// reference under the frozen wind it was planned with. The bounds re-time
/// the same waypoints for a pure headwind (tailwind) of magnitude `d_cap` on
/// every segment and track them with the wind re-aimed every step against
/// (along) the reference velocity. The best-case tailwind never exceeds the
/// reference ground speed.
pub fn predict_energy_triple(
    path: &DesirablePath,
    x0: &UavState,
    d_cap: f64,
    controller: &PidController,
    params: &CraftParams,
    cfg: &PlannerConfig,
) -> Result<EnergyTriple, QuadError> {
    if path.predicted_travel_time() == 0 {
        return Ok(EnergyTriple::ZERO);
    }
    let raw = predict_energy_triple_raw(path, x0, d_cap, controller, params, cfg)?;
    Ok(EnergyTriple { predicted: raw.predicted, max: raw.max.max(raw.predicted), min: raw.min.min(raw.predicted) })
}

/// The three rollouts of [`predict_energy_triple`] before the bounds are
/// widened to contain the forecast. The forecast wind is itself admissible,
/// so the reported extremes are taken over all three; on references whose
/// speed is limited by turns rather than wind the headwind/tailwind rollouts
/// can land a hair inside the forecast.
pub fn predict_energy_triple_raw(
    path: &DesirablePath,
    x0: &UavState,
    d_cap: f64,
    controller: &PidController,
    params: &CraftParams,
    cfg: &PlannerConfig,
) -> Result<EnergyTriple, QuadError> {
    if path.predicted_travel_time() == 0 {
        return Ok(EnergyTriple::ZERO);
    }
    let d_now = path.wind;
    let predicted = predict_inputs(&path.trajectory, x0, |_| d_now, controller, params, cfg.t_s)?.energy;
    let max = bounded_energy(path, x0, d_cap, Bound::Worst, controller, params, cfg)?;
    let min = bounded_energy(path, x0, d_cap, Bound::Best, controller, params, cfg)?;
    Ok(EnergyTriple { predicted, max, min })
}

/// Predicted energy only, for callers that do not need the bounds.
pub fn predict_energy(path: &DesirablePath, x0: &UavState, controller: &PidController, params: &CraftParams, t_s: f64) -> Result<EnergyJ, QuadError> {
    if path.predicted_travel_time() == 0 {
        return Ok(EnergyJ::ZERO);
    }
    let d_now = path.wind;
    Ok(predict_inputs(&path.trajectory, x0, |_| d_now, controller, params, t_s)?.energy)
}

fn bounded_energy(
    path: &DesirablePath,
    x0: &UavState,
    cap: f64,
    bound: Bound,
    controller: &PidController,
    params: &CraftParams,
    cfg: &PlannerConfig,
) -> Result<EnergyJ, QuadError> {
    let wps = &path.waypoints;
    let dirs: Vec<Vec2> = wps.windows(2).map(|w| (w[1] - w[0]).normalized().unwrap_or(Vec2::new(1.0, 0.0))).collect();
    let wind_for = |dir: Vec2| {
        let w = match bound {
            Bound::Worst => worst_case_wind(cap, dir),
            Bound::Best => best_case_wind(cap, dir),
        };
        w.expect("directions are unit vectors")
    };
    let speeds: Vec<f64> = dirs.iter().map(|&dir| segment_ground_speed(cfg.cruise_airspeed, wind_for(dir), dir, cfg.min_ground_speed)).collect();
    let start_v = x0.velocity_2d();
    let reference = desirable_states(wps, &speeds, start_v, &cfg.trajectory_params());
    let ref_ = &reference;
    let wind_at = |k: usize| {
        let v = ref_.states[k + 1].velocity_2d();
        let dir = v.normalized().unwrap_or(dirs[ref_.segment_of[k + 1]]);
        match bound {
            Bound::Worst => wind_for(dir),
            // a tailwind faster than the craft only pushes it back through the air
            Bound::Best => dir * cap.min(v.norm()),
        }
    };
    Ok(predict_inputs(&reference, x0, wind_at, controller, params, cfg.t_s)?.energy)
}
