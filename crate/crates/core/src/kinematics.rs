//! Planar kinematics of the 3-DoF pitch chain (shoulder, elbow, wrist) plus
//! the pass-through grip rotation.
//!
//! Frame conventions: `x` points forward from the shoulder and `z` points up,
//! both in the drone body frame. The elbow frame is offset from link 1 by
//! `l_dis`, perpendicular to the link. The link-2 direction is `θ - β` and the
//! grip direction is `φ = α - β + θ`.
//!
//! Everything here is a pure function of its inputs.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on the reachability discriminant before a target is declared
/// unreachable. Only absorbs rounding on targets sitting exactly on the
/// workspace boundary.
const REACH_EPS: f64 = 1e-12;

/// Solutions this close outside a joint limit are snapped onto it. Covers
/// targets generated from configurations lying exactly on a limit.
const LIMIT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid joint limits: {0}")]
    InvalidLimits(String),
    #[error("target is not finite")]
    NonFiniteTarget,
    #[error("target ({x:.4}, {z:.4}) is outside the reachable annulus")]
    Unreachable { x: f64, z: f64 },
    #[error("target ({x:.4}, {z:.4}) is reachable only outside the joint limits")]
    LimitViolation { x: f64, z: f64 },
}

/// A point in the arm plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, z: 0.0 };

    pub fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }
}

/// Link lengths of the arm, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGeometry {
    /// Upper link, shoulder to elbow.
    pub l1: f64,
    /// Forearm, elbow to wrist.
    pub l2: f64,
    /// Wrist to grip end.
    pub l3: f64,
    /// Perpendicular offset of the elbow frame from link 1.
    pub l_dis: f64,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self {
            l1: 0.30,
            l2: 0.25,
            l3: 0.19,
            l_dis: 0.05,
        }
    }
}

impl LinkGeometry {
    pub fn total_length(&self) -> f64 {
        self.l1 + self.l2 + self.l3
    }

    /// Checks that every length is strictly positive and, when given, that the
    /// three segments add up to `total_length` within 1e-9 m.
    pub fn validate(&self, total_length: Option<f64>) -> Result<(), KinematicsError> {
        for (name, v) in [
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l_dis", self.l_dis),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if let Some(total) = total_length {
            let sum = self.total_length();
            if (sum - total).abs() > 1e-9 {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "l1 + l2 + l3 = {sum} does not match total length {total}"
                )));
            }
        }
        Ok(())
    }
}

/// Mass parameters for the static gravity-torque model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassModel {
    /// Arm mass including electronics, kg.
    pub arm_mass: f64,
    /// Horizontal distance from the shoulder to the arm's own center of mass
    /// when the arm is fully extended, m. The default is calibrated so that
    /// the extended arm holding the maximum payload loads the shoulder with
    /// 5.3 N·m.
    pub arm_com_lever: f64,
    /// Payload mass at the grip end, kg.
    pub payload_mass: f64,
    /// m/s².
    pub gravity: f64,
}

impl Default for MassModel {
    fn default() -> Self {
        Self {
            arm_mass: 0.918,
            arm_com_lever: 0.266,
            payload_mass: 0.4,
            gravity: 9.81,
        }
    }
}

impl MassModel {
    pub fn validate(&self, geom: &LinkGeometry) -> Result<(), KinematicsError> {
        let bad = |msg: String| Err(KinematicsError::InvalidGeometry(msg));
        if !(self.arm_mass.is_finite() && self.arm_mass >= 0.0) {
            return bad(format!("arm_mass must be >= 0, got {}", self.arm_mass));
        }
        if !(self.payload_mass.is_finite() && self.payload_mass >= 0.0) {
            return bad(format!("payload_mass must be >= 0, got {}", self.payload_mass));
        }
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return bad(format!("gravity must be >= 0, got {}", self.gravity));
        }
        let reach = geom.total_length();
        if !(self.arm_com_lever >= 0.0 && self.arm_com_lever <= reach) {
            return bad(format!(
                "arm_com_lever must lie in [0, {reach}], got {}",
                self.arm_com_lever
            ));
        }
        Ok(())
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles {
    /// Shoulder.
    pub theta: f64,
    /// Elbow.
    pub beta: f64,
    /// Wrist pitch.
    pub alpha: f64,
    /// Grip rotation. Not part of the planar chain.
    pub wrist_roll: f64,
}

impl JointAngles {
    pub const ZERO: JointAngles = JointAngles {
        theta: 0.0,
        beta: 0.0,
        alpha: 0.0,
        wrist_roll: 0.0,
    };

    pub fn new(theta: f64, beta: f64, alpha: f64) -> Self {
        Self {
            theta,
            beta,
            alpha,
            wrist_roll: 0.0,
        }
    }

    pub fn with_wrist_roll(mut self, wrist_roll: f64) -> Self {
        self.wrist_roll = wrist_roll;
        self
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta, self.beta, self.alpha, self.wrist_roll]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            theta: a[0],
            beta: a[1],
            alpha: a[2],
            wrist_roll: a[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// End-effector orientation `α - β + θ`, not normalized.
    pub fn grip_orientation(&self) -> f64 {
        self.alpha - self.beta + self.theta
    }
}

/// Closed interval for a single joint, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub min: f64,
    pub max: f64,
}

impl JointRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn from_degrees(min: f64, max: f64) -> Self {
        Self::new(min.to_radians(), max.to_radians())
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    /// `v`, or the nearest bound if `v` is outside by at most `eps`.
    fn admit(&self, v: f64, eps: f64) -> Option<f64> {
        if self.contains(v) {
            Some(v)
        } else if v >= self.min - eps && v <= self.max + eps {
            Some(self.clamp(v))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub theta: JointRange,
    pub beta: JointRange,
    pub alpha: JointRange,
    pub wrist_roll: JointRange,
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            theta: JointRange::from_degrees(-120.0, 120.0),
            beta: JointRange::from_degrees(0.0, 150.0),
            alpha: JointRange::from_degrees(-100.0, 100.0),
            wrist_roll: JointRange::from_degrees(-150.0, 150.0),
        }
    }
}

impl JointLimits {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (name, r) in self.named() {
            if !(r.min.is_finite() && r.max.is_finite() && r.min < r.max) {
                return Err(KinematicsError::InvalidLimits(format!(
                    "{name}: min ({}) must be below max ({})",
                    r.min, r.max
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, JointRange); 4] {
        [
            ("theta", self.theta),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("wrist_roll", self.wrist_roll),
        ]
    }

    pub fn contains(&self, q: &JointAngles) -> bool {
        self.theta.contains(q.theta)
            && self.beta.contains(q.beta)
            && self.alpha.contains(q.alpha)
            && self.wrist_roll.contains(q.wrist_roll)
    }

    pub fn clamp(&self, q: &JointAngles) -> JointAngles {
        JointAngles {
            theta: self.theta.clamp(q.theta),
            beta: self.beta.clamp(q.beta),
            alpha: self.alpha.clamp(q.alpha),
            wrist_roll: self.wrist_roll.clamp(q.wrist_roll),
        }
    }
}

/// Grip-end pose in the drone frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub z: f64,
    /// Orientation in (-π, π].
    pub phi: f64,
}

impl PlanarPose {
    pub fn new(x: f64, z: f64, phi: f64) -> Self {
        Self { x, z, phi }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.phi.is_finite()
    }
}

/// Static joint torques, N·m. Positive when gravity pulls the distal chain
/// toward `-z` in front of the joint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointTorques {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl JointTorques {
    pub fn as_array(&self) -> [f64; 3] {
        [self.t1, self.t2, self.t3]
    }
}

/// Wraps an angle into (-π, π]. Angles already in range are returned
/// bit-for-bit unchanged.
pub fn normalize_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

pub fn fk_elbow(geom: &LinkGeometry, base: Point2, angles: &JointAngles) -> Point2 {
    let (s, c) = angles.theta.sin_cos();
    Point2 {
        x: base.x + geom.l1 * c - geom.l_dis * s,
        z: base.z + geom.l1 * s + geom.l_dis * c,
    }
}

pub fn fk_wrist(geom: &LinkGeometry, base: Point2, angles: &JointAngles) -> Point2 {
    let elbow = fk_elbow(geom, base, angles);
    let (s, c) = (angles.beta - angles.theta).sin_cos();
    Point2 {
        x: elbow.x + geom.l2 * c,
        z: elbow.z - geom.l2 * s,
    }
}

pub fn fk_grip(geom: &LinkGeometry, base: Point2, angles: &JointAngles) -> PlanarPose {
    let wrist = fk_wrist(geom, base, angles);
    let phi = angles.grip_orientation();
    let (s, c) = phi.sin_cos();
    PlanarPose {
        x: wrist.x + geom.l3 * c,
        z: wrist.z + geom.l3 * s,
        phi: normalize_angle(phi),
    }
}

/// Homogeneous transform from the wrist frame to the drone frame, written in
/// closed form rather than by chaining the per-joint positions. Row-major.
pub fn wrist_transform(geom: &LinkGeometry, angles: &JointAngles) -> [[f64; 4]; 4] {
    let (theta, beta) = (angles.theta, angles.beta);
    let phi = angles.grip_orientation();
    let x = geom.l1 * theta.cos() + geom.l2 * (beta - theta).cos() - geom.l_dis * theta.sin();
    let z = geom.l1 * theta.sin() - geom.l2 * (beta - theta).sin() + geom.l_dis * theta.cos();
    let (s, c) = phi.sin_cos();
    [
        [c, -s, 0.0, x],
        [s, c, 0.0, z],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Solves for joint angles placing the grip end at `target` with orientation
/// `target.phi`, shoulder at the origin.
///
/// The elbow branch with the larger `β` is tried first; the other branch is
/// used only when limits reject the first. `wrist_roll` is left at zero for
/// the caller to fill in.
pub fn ik_solve(
    geom: &LinkGeometry,
    target: &PlanarPose,
    limits: &JointLimits,
) -> Result<JointAngles, KinematicsError> {
    if !target.is_finite() {
        return Err(KinematicsError::NonFiniteTarget);
    }
    let phi = target.phi;
    let (sp, cp) = phi.sin_cos();
    let xw = target.x - geom.l3 * cp;
    let zw = target.z - geom.l3 * sp;

    // |wrist|² = l1² + l_dis² + l2² + 2·l2·(l1·cosβ − l_dis·sinβ)
    //          = ... + 2·l2·L·cos(β + δ)
    let shoulder_sq = geom.l1 * geom.l1 + geom.l_dis * geom.l_dis;
    let c = (xw * xw + zw * zw - shoulder_sq - geom.l2 * geom.l2) / (2.0 * geom.l2);
    let mut disc = shoulder_sq - c * c;
    if disc < 0.0 {
        if disc >= -REACH_EPS * shoulder_sq {
            disc = 0.0;
        } else {
            return Err(KinematicsError::Unreachable {
                x: target.x,
                z: target.z,
            });
        }
    }
    let half_angle = disc.sqrt().atan2(c);
    let delta = geom.l_dis.atan2(geom.l1);
    let wrist_bearing = zw.atan2(xw);

    for beta in [half_angle - delta, -half_angle - delta] {
        let Some(beta) = limits.beta.admit(normalize_angle(beta), LIMIT_EPS) else {
            continue;
        };
        let (sb, cb) = beta.sin_cos();
        let k1 = geom.l1 + geom.l2 * cb;
        let k2 = geom.l_dis - geom.l2 * sb;
        let theta = normalize_angle(wrist_bearing - k2.atan2(k1));
        let Some(theta) = limits.theta.admit(theta, LIMIT_EPS) else {
            continue;
        };
        let alpha0 = beta - theta + phi;
        let alpha = [alpha0, alpha0 - TAU, alpha0 + TAU]
            .into_iter()
            .find_map(|a| limits.alpha.admit(a, LIMIT_EPS));
        if let Some(alpha) = alpha {
            return Ok(JointAngles {
                theta,
                beta,
                alpha,
                wrist_roll: 0.0,
            });
        }
    }
    Err(KinematicsError::LimitViolation {
        x: target.x,
        z: target.z,
    })
}

/// True iff [`ik_solve`] succeeds for `target`.
pub fn workspace_contains(geom: &LinkGeometry, limits: &JointLimits, target: &PlanarPose) -> bool {
    ik_solve(geom, target, limits).is_ok()
}

/// Point on the arm's center line whose horizontal distance from the shoulder
/// at full extension equals `lever`. Tracks the same material point through
/// any configuration.
pub fn arm_com_point(geom: &LinkGeometry, base: Point2, angles: &JointAngles, lever: f64) -> Point2 {
    let elbow = fk_elbow(geom, base, angles);
    let wrist = fk_wrist(geom, base, angles);
    let grip = fk_grip(geom, base, angles).position();
    let lerp = |a: Point2, b: Point2, f: f64| Point2::new(a.x + f * (b.x - a.x), a.z + f * (b.z - a.z));
    if lever <= geom.l1 {
        lerp(base, elbow, lever / geom.l1)
    } else if lever <= geom.l1 + geom.l2 {
        lerp(elbow, wrist, (lever - geom.l1) / geom.l2)
    } else {
        lerp(wrist, grip, (lever - geom.l1 - geom.l2) / geom.l3)
    }
}

/// Gravity-only static torques about the shoulder, elbow and wrist.
///
/// The arm's own weight acts at [`arm_com_point`]; the payload, when attached,
/// acts at the grip end. Each joint carries only the masses distal to it.
pub fn static_torques(
    geom: &LinkGeometry,
    masses: &MassModel,
    angles: &JointAngles,
    payload_attached: bool,
) -> JointTorques {
    let base = Point2::ORIGIN;
    let elbow = fk_elbow(geom, base, angles);
    let wrist = fk_wrist(geom, base, angles);
    let grip = fk_grip(geom, base, angles);
    let com = arm_com_point(geom, base, angles, masses.arm_com_lever);
    let g = masses.gravity;
    let payload = if payload_attached { masses.payload_mass } else { 0.0 };

    let joints = [(base.x, 0.0), (elbow.x, geom.l1), (wrist.x, geom.l1 + geom.l2)];
    let mut out = [0.0; 3];
    for (slot, (jx, arc)) in out.iter_mut().zip(joints) {
        let mut moment = payload * (grip.x - jx);
        if masses.arm_com_lever > arc {
            moment += masses.arm_mass * (com.x - jx);
        }
        *slot = g * moment;
    }
    JointTorques {
        t1: out[0],
        t2: out[1],
        t3: out[2],
    }
}
