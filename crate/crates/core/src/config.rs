//! Top-level configuration, loaded from TOML.
//!
//! Every section is optional and falls back to the shipped defaults; unknown
//! keys anywhere are rejected. Joint limits are written in degrees in the file
//! and converted to radians on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drone::{AttitudeSetpoint, DroneParams, MAX_DT};
use crate::kinematics::{JointLimits, JointRange, LinkGeometry, MassModel};
use crate::operator::OperatorSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l_dis: f64,
    /// Overall manipulator length the three segments must add up to, m.
    pub total_length: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = LinkGeometry::default();
        Self {
            l1: g.l1,
            l2: g.l2,
            l3: g.l3,
            l_dis: g.l_dis,
            total_length: 0.74,
        }
    }
}

impl GeometryConfig {
    pub fn links(&self) -> LinkGeometry {
        LinkGeometry {
            l1: self.l1,
            l2: self.l2,
            l3: self.l3,
            l_dis: self.l_dis,
        }
    }
}

/// Joint limits in degrees, `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub theta_deg: [f64; 2],
    pub beta_deg: [f64; 2],
    pub alpha_deg: [f64; 2],
    pub wrist_roll_deg: [f64; 2],
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            theta_deg: [-120.0, 120.0],
            beta_deg: [0.0, 150.0],
            alpha_deg: [-100.0, 100.0],
            wrist_roll_deg: [-150.0, 150.0],
        }
    }
}

impl LimitsConfig {
    pub fn to_limits(&self) -> JointLimits {
        let r = |d: [f64; 2]| JointRange::from_degrees(d[0], d[1]);
        JointLimits {
            theta: r(self.theta_deg),
            beta: r(self.beta_deg),
            alpha: r(self.alpha_deg),
            wrist_roll: r(self.wrist_roll_deg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoConfig {
    /// Per-joint slew limit, rad/s.
    pub max_rate: f64,
    /// Gripper closure rate, fraction per second.
    pub gripper_rate: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            max_rate: 3.0,
            gripper_rate: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperConfig {
    /// Normalized bar force that counts as touching.
    pub contact_threshold: f64,
    /// Closure needed before two-bar contact counts as a grasp.
    pub grasp_fraction_min: f64,
    /// Bar force per unit of closure past first touch.
    pub stiffness: f64,
    /// Grip end must be this close to the object for it to sit in the jaws, m.
    pub capture_radius: f64,
    /// Half-width of uniform noise added to each bar force. 0 disables it.
    pub force_noise: f64,
}

impl Default for GripperConfig {
    fn default() -> Self {
        Self {
            contact_threshold: 0.05,
            grasp_fraction_min: 0.3,
            stiffness: 1.0,
            capture_radius: 0.03,
            force_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoverConfig {
    /// World-frame hover setpoint, m.
    pub position: [f64; 3],
    pub yaw: f64,
}

impl Default for HoverConfig {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 1.5],
            yaw: 0.0,
        }
    }
}

impl HoverConfig {
    pub fn setpoint(&self) -> AttitudeSetpoint {
        AttitudeSetpoint {
            position: self.position,
            yaw: self.yaw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryConfig {
    pub port: u16,
    /// Simulation tick rate, Hz.
    pub sim_rate: u32,
    /// Frame publication rate, Hz. Must divide `sim_rate`.
    pub rate: u32,
    /// Per-consumer frame buffer; oldest frames are dropped when full.
    pub buffer_capacity: usize,
    /// Artificial delay applied to every incoming command, s.
    pub command_latency: f64,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        Self {
            port: 7450,
            sim_rate: 100,
            rate: 100,
            buffer_capacity: 32,
            command_latency: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub mass: MassModel,
    pub limits: LimitsConfig,
    pub servo: ServoConfig,
    pub gripper: GripperConfig,
    pub drone: DroneParams,
    pub hover: HoverConfig,
    pub operator: OperatorSettings,
    pub telemetry: TelemetryConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn links(&self) -> LinkGeometry {
        self.geometry.links()
    }

    pub fn joint_limits(&self) -> JointLimits {
        self.limits.to_limits()
    }

    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.telemetry.sim_rate)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let links = self.links();
        links
            .validate(Some(self.geometry.total_length))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.mass
            .validate(&links)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.joint_limits()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let s = &self.servo;
        if !(s.max_rate > 0.0 && s.max_rate.is_finite()) {
            return invalid(format!("servo.max_rate must be > 0, got {}", s.max_rate));
        }
        if !(s.gripper_rate > 0.0 && s.gripper_rate.is_finite()) {
            return invalid(format!("servo.gripper_rate must be > 0, got {}", s.gripper_rate));
        }

        let g = &self.gripper;
        if !(g.contact_threshold > 0.0 && g.contact_threshold < 1.0) {
            return invalid(format!(
                "gripper.contact_threshold must lie in (0, 1), got {}",
                g.contact_threshold
            ));
        }
        if !(0.0..1.0).contains(&g.grasp_fraction_min) {
            return invalid(format!(
                "gripper.grasp_fraction_min must lie in [0, 1), got {}",
                g.grasp_fraction_min
            ));
        }
        if !(g.stiffness > 0.0 && g.stiffness.is_finite()) {
            return invalid(format!("gripper.stiffness must be > 0, got {}", g.stiffness));
        }
        if !(g.capture_radius > 0.0 && g.capture_radius.is_finite()) {
            return invalid(format!("gripper.capture_radius must be > 0, got {}", g.capture_radius));
        }
        if !(g.force_noise >= 0.0 && g.force_noise <= 1.0) {
            return invalid(format!("gripper.force_noise must lie in [0, 1], got {}", g.force_noise));
        }

        self.drone.validate().map_err(ConfigError::Invalid)?;
        if !self.hover.position.iter().all(|v| v.is_finite()) || !self.hover.yaw.is_finite() {
            return invalid("hover setpoint must be finite".into());
        }

        let o = &self.operator;
        for (name, v) in [
            ("stale_window", o.stale_window),
            ("align_window", o.align_window),
            ("max_jog_step", o.max_jog_step),
            ("jog_step", o.jog_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("operator.{name} must be > 0, got {v}"));
            }
        }
        if o.jog_step > o.max_jog_step {
            return invalid("operator.jog_step exceeds operator.max_jog_step".into());
        }

        let t = &self.telemetry;
        if t.sim_rate == 0 || self.dt() > MAX_DT {
            return invalid(format!(
                "telemetry.sim_rate must be at least {} Hz, got {}",
                (1.0 / MAX_DT) as u32,
                t.sim_rate
            ));
        }
        if t.rate == 0 || !t.sim_rate.is_multiple_of(t.rate) {
            return invalid(format!(
                "telemetry.rate ({}) must be a positive divisor of sim_rate ({})",
                t.rate, t.sim_rate
            ));
        }
        if t.buffer_capacity == 0 {
            return invalid("telemetry.buffer_capacity must be >= 1".into());
        }
        if !(t.command_latency >= 0.0 && t.command_latency.is_finite()) {
            return invalid(format!(
                "telemetry.command_latency must be >= 0, got {}",
                t.command_latency
            ));
        }
        Ok(())
    }

    /// Stable error code for CLI output.
    pub fn error_code(err: &ConfigError) -> &'static str {
        match err {
            ConfigError::Io { .. } => "config_io",
            ConfigError::Parse(_) => "config_parse",
            ConfigError::Invalid(_) => "config_invalid",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn toml_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = Config::from_toml("[geometry]\nl4 = 0.1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("l4"), "{err}");
        assert!(Config::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn geometry_must_sum_to_total_length() {
        let err = Config::from_toml("[geometry]\nl1 = 0.3\nl2 = 0.3\nl3 = 0.19\nl_dis = 0.05\ntotal_length = 0.74\n")
            .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn rate_must_divide_sim_rate() {
        let mut c = Config::default();
        c.telemetry.rate = 30;
        assert!(c.validate().is_err());
        c.telemetry.rate = 50;
        assert!(c.validate().is_ok());
        c.telemetry.sim_rate = 40;
        c.telemetry.rate = 40;
        assert!(c.validate().is_err());
    }

    #[test]
    fn threshold_range() {
        let mut c = Config::default();
        c.gripper.contact_threshold = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn limits_convert_to_radians() {
        let l = Config::default().joint_limits();
        assert_eq!(l.beta.min, 0.0);
        assert_eq!(l.beta.max, 150f64.to_radians());
    }
}
