//! Quadrotor model: rotor mixer, rigid-body dynamics and the traveling-energy
//! formulas.
//!
//! Rotors 1 and 3 sit on the body x axis, rotors 2 and 4 on the body y axis.
//! Rotors 1 and 3 spin the opposite way to rotors 2 and 4, which fixes the
//! sign pattern of the yaw moment. Euler angles are roll/pitch/yaw applied in
//! Z-Y-X order.

use crate::geometry::{Position2D, Vec2};
use crate::disturbance::WindVector;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("rotor {rotor} speed {omega:.3} rad/s outside [0, {omega_max}]")]
    Saturation { rotor: usize, omega: f64, omega_max: f64 },
    #[error("input not realizable: rotor {rotor} would need omega^2 = {omega_sq:.6e}")]
    Unrealizable { rotor: usize, omega_sq: f64 },
    #[error("input at time index {index} not realizable: rotor {rotor} would need omega^2 = {omega_sq:.6e}")]
    UnrealizableAt { index: usize, rotor: usize, omega_sq: f64 },
    #[error("maximum thrust {max_thrust:.4} N cannot lift weight {weight:.4} N")]
    CannotLift { max_thrust: f64, weight: f64 },
    #[error("pitch {pitch:.4} rad reached the Euler singularity")]
    Singularity { pitch: f64 },
    #[error("sampling period must be positive, got {0}")]
    BadTimeStep(f64),
}

/// Physical constants of one craft. All values strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraftParams {
    pub mass_kg: f64,
    pub arm_m: f64,
    /// Thrust constant, N s^2 / rad^2.
    pub kappa_f: f64,
    /// Moment constant, N m s^2 / rad^2.
    pub kappa_m: f64,
    pub omega_max: f64,
    pub drag_coeff: f64,
    pub air_density: f64,
    pub ref_area_m2: f64,
    pub gravity: f64,
}

impl Default for CraftParams {
    fn default() -> Self {
        Self {
            mass_kg: 0.18,
            arm_m: 0.086,
            kappa_f: 6.11e-8,
            kappa_m: 1.5e-9,
            omega_max: 7800.0,
            drag_coeff: 1.0,
            air_density: 1.225,
            ref_area_m2: 0.01,
            gravity: 9.81,
        }
    }
}

impl CraftParams {
    pub fn weight(&self) -> f64 {
        self.mass_kg * self.gravity
    }

    /// Thrust with all rotors at `omega_max`.
    pub fn max_thrust(&self) -> f64 {
        4.0 * self.kappa_f * self.omega_max * self.omega_max
    }

    /// Power with all rotors at `omega_max`, the constant used by the
    /// closed-form hop energy.
    pub fn max_power(&self) -> f64 {
        4.0 * self.kappa_m * self.omega_max.powi(3)
    }

    /// Drag force per squared relative airspeed, `C_d * rho * R / 2`.
    pub fn drag_factor(&self) -> f64 {
        0.5 * self.drag_coeff * self.air_density * self.ref_area_m2
    }

    /// Diagonal inertia from a point mass of `m/4` at each arm tip.
    pub fn inertia(&self) -> Vector3<f64> {
        let arm = self.mass_kg / 4.0 * self.arm_m * self.arm_m;
        Vector3::new(2.0 * arm, 2.0 * arm, 4.0 * arm)
    }

    pub fn is_valid(&self) -> bool {
        [
            self.mass_kg,
            self.arm_m,
            self.kappa_f,
            self.kappa_m,
            self.omega_max,
            self.drag_coeff,
            self.air_density,
            self.ref_area_m2,
            self.gravity,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
    }
}

/// Net thrust (N) and body moments (N m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InputVector {
    pub thrust: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

impl InputVector {
    pub fn new(thrust: f64, mx: f64, my: f64, mz: f64) -> Self {
        Self { thrust, mx, my, mz }
    }

    pub fn hover(params: &CraftParams) -> Self {
        Self::new(params.weight(), 0.0, 0.0, 0.0)
    }

    pub fn moments(&self) -> Vector3<f64> {
        Vector3::new(self.mx, self.my, self.mz)
    }
}

/// Position, velocity, Euler angles `[roll, pitch, yaw]` and body rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub theta: Vector3<f64>,
    pub omega: Vector3<f64>,
}

impl UavState {
    /// At rest, level, at `pos` and altitude `z`.
    pub fn at_rest(pos: Position2D, z: f64) -> Self {
        Self {
            p: Vector3::new(pos.x, pos.y, z),
            v: Vector3::zeros(),
            theta: Vector3::zeros(),
            omega: Vector3::zeros(),
        }
    }

    pub fn position_2d(&self) -> Position2D {
        Vec2::new(self.p.x, self.p.y)
    }

    pub fn velocity_2d(&self) -> Vec2 {
        Vec2::new(self.v.x, self.v.y)
    }
}

/// Energy in joules. [`EnergyJ::INFEASIBLE`] marks a hop that cannot be flown
/// and behaves as `+inf` in sums and comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyJ(f64);

impl EnergyJ {
    pub const ZERO: EnergyJ = EnergyJ(0.0);
    pub const INFEASIBLE: EnergyJ = EnergyJ(f64::INFINITY);

    pub fn new(joules: f64) -> Self {
        debug_assert!(joules >= 0.0 && !joules.is_nan(), "energy must be nonnegative, got {joules}");
        EnergyJ(joules)
    }

    pub fn is_feasible(self) -> bool {
        self.0.is_finite()
    }

    pub fn joules(self) -> Option<f64> {
        self.is_feasible().then_some(self.0)
    }

    /// Raw value, `+inf` when infeasible.
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Eq for EnergyJ {}

impl PartialOrd for EnergyJ {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EnergyJ {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for EnergyJ {
    type Output = EnergyJ;
    fn add(self, rhs: EnergyJ) -> EnergyJ {
        EnergyJ(self.0 + rhs.0)
    }
}

impl AddAssign for EnergyJ {
    fn add_assign(&mut self, rhs: EnergyJ) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for EnergyJ {
    fn sum<I: Iterator<Item = EnergyJ>>(iter: I) -> EnergyJ {
        iter.fold(EnergyJ::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for EnergyJ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_feasible() {
            write!(f, "{:.3} J", self.0)
        } else {
            f.write_str("INFEASIBLE")
        }
    }
}

/// Net thrust and moments produced by four rotor speeds.
pub fn mixer(rotor_speeds: [f64; 4], params: &CraftParams) -> Result<InputVector, QuadError> {
    for (i, &w) in rotor_speeds.iter().enumerate() {
        if !(0.0..=params.omega_max).contains(&w) {
            return Err(QuadError::Saturation { rotor: i + 1, omega: w, omega_max: params.omega_max });
        }
    }
    Ok(mixer_squared(rotor_speeds.map(|w| w * w), params))
}

/// The 4x4 mixing matrix applied to squared rotor speeds.
pub fn mixer_squared(s: [f64; 4], params: &CraftParams) -> InputVector {
    let kf = params.kappa_f;
    let lk = params.arm_m * kf;
    let km = params.kappa_m;
    InputVector {
        thrust: kf * (s[0] + s[1] + s[2] + s[3]),
        mx: lk * (s[1] - s[3]),
        my: lk * (s[2] - s[0]),
        mz: km * (s[0] - s[1] + s[2] - s[3]),
    }
}

/// Squared rotor speeds solving the mixer for `u`, without range checks.
pub fn mixer_inverse_squared(u: &InputVector, params: &CraftParams) -> [f64; 4] {
    let total = u.thrust / params.kappa_f;
    let roll = u.mx / (params.arm_m * params.kappa_f);
    let pitch = u.my / (params.arm_m * params.kappa_f);
    let yaw = u.mz / params.kappa_m;
    let odd = 0.5 * (total + yaw); // rotors 1 + 3
    let even = 0.5 * (total - yaw); // rotors 2 + 4
    [0.5 * (odd - pitch), 0.5 * (even + roll), 0.5 * (odd + pitch), 0.5 * (even - roll)]
}

/// Rotor speeds (rad/s) realizing `u`.
pub fn mixer_inverse(u: &InputVector, params: &CraftParams) -> Result<[f64; 4], QuadError> {
    let sq = mixer_inverse_squared(u, params);
    let cap = params.omega_max * params.omega_max;
    let tol = cap * 1e-12;
    let mut out = [0.0; 4];
    for (i, &s) in sq.iter().enumerate() {
        if s < -tol || s > cap + tol {
            return Err(QuadError::Unrealizable { rotor: i + 1, omega_sq: s });
        }
        out[i] = s.clamp(0.0, cap).sqrt();
    }
    Ok(out)
}

/// Projects `u` onto the realizable set by clamping each squared rotor speed
/// into `[0, omega_max^2]`. Returns the realized input, its rotor speeds and
/// whether any rotor had to be clamped.
pub fn clamp_to_realizable(u: &InputVector, params: &CraftParams) -> (InputVector, [f64; 4], bool) {
    let sq = mixer_inverse_squared(u, params);
    let cap = params.omega_max * params.omega_max;
    let tol = cap * 1e-12;
    let mut saturated = false;
    let clamped = sq.map(|s| {
        if s < -tol || s > cap + tol {
            saturated = true;
        }
        s.clamp(0.0, cap)
    });
    if saturated {
        (mixer_squared(clamped, params), clamped.map(f64::sqrt), true)
    } else {
        (*u, clamped.map(f64::sqrt), false)
    }
}

/// Total rotor power, `kappa_m * sum(omega_i^3)`.
pub fn rotor_power(rotor_speeds: &[f64; 4], params: &CraftParams) -> f64 {
    params.kappa_m * rotor_speeds.iter().map(|w| w * w * w).sum::<f64>()
}

/// Airspeed at which full-thrust horizontal force balances drag.
pub fn max_relative_speed(params: &CraftParams) -> Result<f64, QuadError> {
    let f_max = params.max_thrust();
    let weight = params.weight();
    let diff = f_max * f_max - weight * weight;
    if diff < -1e-12 * f_max * f_max {
        return Err(QuadError::CannotLift { max_thrust: f_max, weight });
    }
    Ok((diff.max(0.0).sqrt() / params.drag_factor()).sqrt())
}

/// Ground speed along unit direction `dir` when flying at `airspeed` relative
/// to the air and crabbing to hold course against `wind`.
///
/// `None` when the crosswind exceeds the airspeed or the headwind leaves no
/// forward progress.
pub fn ground_speed_along(airspeed: f64, wind: WindVector, dir: Vec2) -> Option<f64> {
    let along = wind.dot(dir); // |d| cos(theta)
    let across = wind.cross(dir); // +-|d| sin(theta)
    let radicand = airspeed * airspeed - across * across;
    if radicand <= 0.0 {
        return None;
    }
    let speed = radicand.sqrt() + along;
    (speed > 0.0).then_some(speed)
}

/// Energy to fly straight from `p_i` to `p_j` at maximum power and maximum
/// airspeed under constant wind `d`.
pub fn travel_energy(p_i: Position2D, p_j: Position2D, d: WindVector, params: &CraftParams) -> Result<EnergyJ, QuadError> {
    let vr = max_relative_speed(params)?;
    Ok(travel_energy_with(p_i, p_j, d, vr, params.max_power()))
}

/// [`travel_energy`] with the airspeed and power precomputed.
#[inline]
pub fn travel_energy_with(p_i: Position2D, p_j: Position2D, d: WindVector, v_rel: f64, power: f64) -> EnergyJ {
    let delta = p_j - p_i;
    let dist = delta.norm();
    if dist == 0.0 {
        return EnergyJ::ZERO;
    }
    let dir = delta * (1.0 / dist);
    match ground_speed_along(v_rel, d, dir) {
        Some(v_ground) => EnergyJ::new(power * dist / v_ground),
        None => EnergyJ::INFEASIBLE,
    }
}

/// One explicit-Euler step of the rigid-body model under wind `d`.
///
/// Drag opposes the velocity relative to the air with magnitude
/// `C_d rho R |v - d|^2 / 2`; the wind has no vertical component.
pub fn step_dynamics(x: &UavState, u: &InputVector, d: WindVector, params: &CraftParams, t_s: f64) -> Result<UavState, QuadError> {
    if !(t_s > 0.0) {
        return Err(QuadError::BadTimeStep(t_s));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    if x.theta.y.abs() >= half_pi {
        return Err(QuadError::Singularity { pitch: x.theta.y });
    }
    let (sr, cr) = x.theta.x.sin_cos();
    let (sp, cp) = x.theta.y.sin_cos();
    let (sy, cy) = x.theta.z.sin_cos();

    let body_z = Vector3::new(cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr);
    let v_rel = x.v - Vector3::new(d.x, d.y, 0.0);
    let drag = -params.drag_factor() * v_rel.norm() * v_rel;
    let accel = (body_z * u.thrust + drag) / params.mass_kg - Vector3::new(0.0, 0.0, params.gravity);

    let (p, q, r) = (x.omega.x, x.omega.y, x.omega.z);
    let euler_rate = Vector3::new(p + (q * sr + r * cr) * sp / cp, q * cr - r * sr, (q * sr + r * cr) / cp);

    let j = params.inertia();
    let j_omega = j.component_mul(&x.omega);
    let omega_dot = (u.moments() - x.omega.cross(&j_omega)).component_div(&j);

    let next = UavState {
        p: x.p + x.v * t_s,
        v: x.v + accel * t_s,
        theta: x.theta + euler_rate * t_s,
        omega: x.omega + omega_dot * t_s,
    };
    if next.theta.y.abs() >= half_pi {
        return Err(QuadError::Singularity { pitch: next.theta.y });
    }
    Ok(next)
}

/// Energy of an input sequence held for `t_s` each, from rotor power.
pub fn piecewise_energy(u_seq: &[InputVector], params: &CraftParams, t_s: f64) -> Result<EnergyJ, QuadError> {
    let mut total = 0.0;
    for (index, u) in u_seq.iter().enumerate() {
        let speeds = mixer_inverse(u, params).map_err(|e| match e {
            QuadError::Unrealizable { rotor, omega_sq } => QuadError::UnrealizableAt { index, rotor, omega_sq },
            other => other,
        })?;
        total += rotor_power(&speeds, params) * t_s;
    }
    Ok(EnergyJ::new(total))
}
