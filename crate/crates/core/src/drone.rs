//! Hover model of the quadrotor.
//!
//! Roll and pitch are independent linear second-order axes closed by a PD
//! attitude loop, integrated with semi-implicit Euler:
//!
//! ```text
//! rate  += dt * (-2ζω·rate - ω²·angle + disturbance)
//! angle += dt * rate
//! ```
//!
//! Position follows its setpoint with a first-order lag plus a small tilt
//! coupling. The arm enters only through [`ArmDisturbance`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{fk_grip, JointAngles, JointTorques, LinkGeometry, MassModel, Point2};

pub const MAX_DT: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DroneError {
    #[error("time step {0} s is outside (0, {MAX_DT}]")]
    InvalidTimestep(f64),
    #[error("attitude diverged: roll {roll:.3} rad, pitch {pitch:.3} rad")]
    Diverged { roll: f64, pitch: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroneState {
    /// World frame, m.
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Roll, pitch and yaw rates, rad/s.
    pub angular_rate: [f64; 3],
}

impl DroneState {
    pub fn hovering_at(position: [f64; 3]) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    /// Quadratic attitude energy `ω²(roll² + pitch²) + roll_rate² + pitch_rate²`.
    /// Non-increasing under the integrator while no disturbance acts.
    pub fn attitude_energy(&self, natural_frequency: f64) -> f64 {
        let w2 = natural_frequency * natural_frequency;
        w2 * (self.roll * self.roll + self.pitch * self.pitch)
            + self.angular_rate[0] * self.angular_rate[0]
            + self.angular_rate[1] * self.angular_rate[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttitudeSetpoint {
    pub position: [f64; 3],
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingParams {
    /// Pitch acceleration per N·m of untrimmed arm moment, rad/s² per N·m.
    pub com_gain: f64,
    /// Roll acceleration per N·m/s of joint-torque rate.
    pub torque_gain: f64,
    /// Pitch-rate kick per kg·m of payload attached or released at the grip.
    pub payload_step_gain: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            com_gain: 1.0,
            torque_gain: 0.08,
            payload_step_gain: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneParams {
    /// rad/s.
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    /// The flight controller trims out a static arm moment with this time
    /// constant, s.
    pub trim_time_constant: f64,
    /// Position lag toward the setpoint, s.
    pub position_time_constant: f64,
    /// Horizontal drift per unit tilt, m/s per rad.
    pub tilt_drift: f64,
    pub coupling: CouplingParams,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            natural_frequency: 3.0,
            damping_ratio: 0.6,
            trim_time_constant: 0.5,
            position_time_constant: 1.0,
            tilt_drift: 0.5,
            coupling: CouplingParams::default(),
        }
    }
}

impl DroneParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("natural_frequency", self.natural_frequency),
            ("damping_ratio", self.damping_ratio),
            ("trim_time_constant", self.trim_time_constant),
            ("position_time_constant", self.position_time_constant),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("drone.{name} must be > 0, got {v}"));
            }
        }
        let nonneg = [
            ("tilt_drift", self.tilt_drift),
            ("coupling.com_gain", self.coupling.com_gain),
            ("coupling.torque_gain", self.coupling.torque_gain),
            ("coupling.payload_step_gain", self.coupling.payload_step_gain),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("drone.{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// What the arm does to the airframe during one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmDisturbance {
    /// Static gravity moment of arm and payload about the mount, N·m.
    pub moment: f64,
    /// Portion of `moment` the flight controller has already trimmed out.
    pub trimmed_moment: f64,
    /// Sum of the three joint torques, kept for the next finite difference.
    pub torque_sum: f64,
    /// Mass hanging at the grip end, kg.
    pub suspended_payload: f64,
    /// Roll acceleration, rad/s².
    pub roll_accel: f64,
    /// Pitch acceleration, rad/s².
    pub pitch_accel: f64,
    /// One-off change of pitch rate this step, rad/s.
    pub pitch_rate_kick: f64,
}

impl ArmDisturbance {
    /// A fully trimmed, quiescent starting point for the given arm state.
    pub fn settled(torques: &JointTorques, payload: f64) -> Self {
        Self {
            moment: torques.t1,
            trimmed_moment: torques.t1,
            torque_sum: torques.t1 + torques.t2 + torques.t3,
            suspended_payload: payload,
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.roll_accel == 0.0 && self.pitch_accel == 0.0 && self.pitch_rate_kick == 0.0
    }
}

/// Maps the current arm state onto attitude disturbances.
///
/// Pitch sees the untrimmed part of the shoulder moment (arm CoM offset times
/// arm and payload weight) and a kick when the payload is attached or
/// released. Roll sees the finite-difference rate of the summed joint torques.
#[allow(clippy::too_many_arguments)]
pub fn arm_disturbance(
    geom: &LinkGeometry,
    joints: &JointAngles,
    torques: &JointTorques,
    masses: &MassModel,
    payload_attached: bool,
    prev: &ArmDisturbance,
    params: &DroneParams,
    dt: f64,
) -> ArmDisturbance {
    let c = &params.coupling;
    let moment = torques.t1;
    let alpha = dt / params.trim_time_constant;
    let trimmed_moment = prev.trimmed_moment + alpha.min(1.0) * (moment - prev.trimmed_moment);
    let torque_sum = torques.t1 + torques.t2 + torques.t3;
    let torque_rate = (torque_sum - prev.torque_sum) / dt;
    let suspended_payload = if payload_attached { masses.payload_mass } else { 0.0 };
    let grip_x = fk_grip(geom, Point2::ORIGIN, joints).x;
    let mass_step = suspended_payload - prev.suspended_payload;

    ArmDisturbance {
        moment,
        trimmed_moment,
        torque_sum,
        suspended_payload,
        roll_accel: c.torque_gain * torque_rate,
        pitch_accel: -c.com_gain * (moment - trimmed_moment),
        pitch_rate_kick: -c.payload_step_gain * mass_step * grip_x,
    }
}

/// Advances the airframe by `dt`.
pub fn step_drone(
    state: &DroneState,
    setpoint: &AttitudeSetpoint,
    disturbance: &ArmDisturbance,
    params: &DroneParams,
    dt: f64,
) -> Result<DroneState, DroneError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DroneError::InvalidTimestep(dt));
    }
    let w = params.natural_frequency;
    let w2 = w * w;
    let damp = 2.0 * params.damping_ratio * w;
    let mut next = *state;

    let axis = |angle: f64, rate: f64, accel: f64| {
        let rate = rate + dt * (-damp * rate - w2 * angle + accel);
        (angle + dt * rate, rate)
    };
    (next.roll, next.angular_rate[0]) = axis(state.roll, state.angular_rate[0], disturbance.roll_accel);
    (next.pitch, next.angular_rate[1]) = axis(
        state.pitch,
        state.angular_rate[1] + disturbance.pitch_rate_kick,
        disturbance.pitch_accel,
    );
    (next.yaw, next.angular_rate[2]) =
        axis(state.yaw - setpoint.yaw, state.angular_rate[2], 0.0);
    next.yaw += setpoint.yaw;

    let tau = params.position_time_constant;
    let drift = params.tilt_drift;
    next.velocity = [
        (setpoint.position[0] - state.position[0]) / tau - drift * next.pitch.sin(),
        (setpoint.position[1] - state.position[1]) / tau + drift * next.roll.sin(),
        (setpoint.position[2] - state.position[2]) / tau,
    ];
    for (p, v) in next.position.iter_mut().zip(next.velocity) {
        *p += dt * v;
    }

    let limit = std::f64::consts::FRAC_PI_2;
    if !(next.roll.abs() < limit && next.pitch.abs() < limit) {
        return Err(DroneError::Diverged {
            roll: next.roll,
            pitch: next.pitch,
        });
    }
    Ok(next)
}
