//! Human input: teleoperation from tracker and glove samples, arrow-key style
//! Cartesian jogging, and scripted waypoint replays.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    fk_grip, ik_solve, JointAngles, JointLimits, KinematicsError, LinkGeometry, PlanarPose, Point2,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("input is stale: newest sample is {age:.3} s old")]
    StaleInput { age: f64 },
    #[error("tracker and glove samples are {skew:.3} s apart")]
    Misaligned { skew: f64 },
    #[error("jog step ({dx}, {dz}) exceeds the {max} m limit")]
    StepTooLarge { dx: f64, dz: f64, max: f64 },
    #[error("waypoint {index}: {reason}")]
    Validation { index: usize, reason: String },
    #[error("scenario: {0}")]
    Scenario(String),
}

/// Human shoulder and elbow angles already resolved from the tracker poses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackerSample {
    pub shoulder_angle: f64,
    pub elbow_angle: f64,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GloveSample {
    /// Finger flexion, thumb first, each in [0, 1].
    pub flex: [f64; 5],
    /// Hand pitch from the glove IMU, rad.
    pub wrist_pitch: f64,
    /// Hand roll from the glove IMU, rad.
    #[serde(default)]
    pub wrist_roll: f64,
    pub timestamp: f64,
}

/// How five finger flexions reduce to one grip closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripMapping {
    #[default]
    Mean,
    Max,
    IndexFinger,
}

impl GripMapping {
    pub fn reduce(&self, flex: &[f64; 5]) -> f64 {
        let flex = flex.map(|f| f.clamp(0.0, 1.0));
        match self {
            GripMapping::Mean => flex.iter().sum::<f64>() / 5.0,
            GripMapping::Max => flex.iter().copied().fold(0.0, f64::max),
            GripMapping::IndexFinger => flex[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSettings {
    /// Inputs older than this hold the arm, s.
    pub stale_window: f64,
    /// Maximum tracker/glove timestamp skew, s.
    pub align_window: f64,
    /// Largest accepted jog increment per axis, m.
    pub max_jog_step: f64,
    /// Increment of one arrow-key press, m.
    pub jog_step: f64,
    pub grip_mapping: GripMapping,
}

impl Default for OperatorSettings {
    fn default() -> Self {
        Self {
            stale_window: 0.2,
            align_window: 0.05,
            max_jog_step: 0.05,
            jog_step: 0.02,
            grip_mapping: GripMapping::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandMode {
    Teleop,
    Jog,
    Script,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptPhase {
    Travel,
    Dwell,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianStep {
    pub dx: f64,
    pub dz: f64,
}

/// Mode-specific payload; exactly one is carried per command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CommandKind {
    Teleop {
        joint_targets: JointAngles,
    },
    Jog {
        step: CartesianStep,
        /// Joint targets resolved for the stepped pose.
        joint_targets: JointAngles,
    },
    Script {
        joint_targets: JointAngles,
        waypoint: usize,
        phase: ScriptPhase,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorCommand {
    pub timestamp: f64,
    pub grip_fraction: f64,
    #[serde(flatten)]
    pub kind: CommandKind,
}

impl OperatorCommand {
    pub fn mode(&self) -> CommandMode {
        match self.kind {
            CommandKind::Teleop { .. } => CommandMode::Teleop,
            CommandKind::Jog { .. } => CommandMode::Jog,
            CommandKind::Script { .. } => CommandMode::Script,
        }
    }

    pub fn joint_targets(&self) -> JointAngles {
        match self.kind {
            CommandKind::Teleop { joint_targets }
            | CommandKind::Jog { joint_targets, .. }
            | CommandKind::Script { joint_targets, .. } => joint_targets,
        }
    }
}

/// Maps human joint angles and hand state straight onto the arm.
///
/// Stale or misaligned input is an error; the caller holds the arm in place.
pub fn teleop_map(
    tracker: &TrackerSample,
    glove: &GloveSample,
    now: f64,
    limits: &JointLimits,
    settings: &OperatorSettings,
) -> Result<OperatorCommand, OperatorError> {
    let skew = (tracker.timestamp - glove.timestamp).abs();
    if skew > settings.align_window {
        return Err(OperatorError::Misaligned { skew });
    }
    let age = now - tracker.timestamp.min(glove.timestamp);
    if age > settings.stale_window {
        return Err(OperatorError::StaleInput { age });
    }
    let raw = JointAngles {
        theta: tracker.shoulder_angle,
        beta: tracker.elbow_angle,
        alpha: glove.wrist_pitch,
        wrist_roll: glove.wrist_roll,
    };
    Ok(OperatorCommand {
        timestamp: now,
        grip_fraction: settings.grip_mapping.reduce(&glove.flex),
        kind: CommandKind::Teleop {
            joint_targets: limits.clamp(&raw),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum JogOutcome {
    Accepted {
        command: OperatorCommand,
        pose: PlanarPose,
    },
    /// The arm keeps `hold`; nothing moves.
    Rejected {
        reason: JogRejection,
        hold: JointAngles,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JogRejection {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Shifts the commanded grip pose by `step` (orientation unchanged) and
/// resolves it through IK.
#[allow(clippy::too_many_arguments)]
pub fn jog_step(
    current: &PlanarPose,
    current_joints: &JointAngles,
    step: CartesianStep,
    grip_fraction: f64,
    geom: &LinkGeometry,
    limits: &JointLimits,
    settings: &OperatorSettings,
    now: f64,
) -> JogOutcome {
    let reject = |reason: JogRejection| JogOutcome::Rejected {
        reason,
        hold: *current_joints,
    };
    let max = settings.max_jog_step;
    if !(step.dx.abs() <= max && step.dz.abs() <= max) {
        return reject(
            OperatorError::StepTooLarge {
                dx: step.dx,
                dz: step.dz,
                max,
            }
            .into(),
        );
    }
    let command = |joint_targets, pose| JogOutcome::Accepted {
        command: OperatorCommand {
            timestamp: now,
            grip_fraction,
            kind: CommandKind::Jog {
                step,
                joint_targets,
            },
        },
        pose,
    };
    if step.dx == 0.0 && step.dz == 0.0 {
        return command(*current_joints, *current);
    }
    let target = PlanarPose::new(current.x + step.dx, current.z + step.dz, current.phi);
    match ik_solve(geom, &target, limits) {
        Ok(q) => command(q.with_wrist_roll(current_joints.wrist_roll), target),
        Err(e) => reject(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointAction {
    #[default]
    None,
    Grasp,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptWaypoint {
    pub x: f64,
    pub z: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub dwell: f64,
    #[serde(default)]
    pub action: WaypointAction,
}

impl ScriptWaypoint {
    pub fn target(&self) -> PlanarPose {
        PlanarPose::new(self.x, self.z, self.phi)
    }
}

/// The object to be grasped, in the arm plane of the drone frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub x: f64,
    pub z: f64,
    /// Width across the jaws, normalized to the full jaw opening.
    #[serde(default = "SceneObject::default_size")]
    pub size: f64,
}

impl SceneObject {
    fn default_size() -> f64 {
        0.5
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.z)
    }
}

/// Keyframe of a recorded or synthetic operator session; samples between
/// keyframes are linearly interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleopKeyframe {
    pub t: f64,
    pub shoulder: f64,
    pub elbow: f64,
    pub wrist_pitch: f64,
    #[serde(default)]
    pub wrist_roll: f64,
    pub flex: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleopProfile {
    pub keyframes: Vec<TeleopKeyframe>,
}

impl TeleopProfile {
    pub fn duration(&self) -> f64 {
        self.keyframes.last().map_or(0.0, |k| k.t)
    }

    /// Tracker and glove readings at time `t`, held at the ends.
    pub fn samples_at(&self, t: f64) -> (TrackerSample, GloveSample) {
        let ks = &self.keyframes;
        let i = ks.partition_point(|k| k.t <= t);
        let (a, b, f) = if i == 0 {
            (&ks[0], &ks[0], 0.0)
        } else if i == ks.len() {
            (&ks[i - 1], &ks[i - 1], 0.0)
        } else {
            let (a, b) = (&ks[i - 1], &ks[i]);
            (a, b, (t - a.t) / (b.t - a.t))
        };
        let lerp = |x: f64, y: f64| x + f * (y - x);
        let mut flex = [0.0; 5];
        for (k, slot) in flex.iter_mut().enumerate() {
            *slot = lerp(a.flex[k], b.flex[k]);
        }
        (
            TrackerSample {
                shoulder_angle: lerp(a.shoulder, b.shoulder),
                elbow_angle: lerp(a.elbow, b.elbow),
                timestamp: t,
            },
            GloveSample {
                flex,
                wrist_pitch: lerp(a.wrist_pitch, b.wrist_pitch),
                wrist_roll: lerp(a.wrist_roll, b.wrist_roll),
                timestamp: t,
            },
        )
    }
}

/// A task file: either waypoints for the script player or keyframes for a
/// teleoperation replay, plus the object in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub object: Option<SceneObject>,
    /// Grip pose the arm starts from; the zero pose when absent. Teleop
    /// replays start from their first keyframe instead.
    #[serde(default)]
    pub start: Option<PlanarPose>,
    /// Seconds simulated after the last command, s.
    #[serde(default = "Scenario::default_settle")]
    pub settle: f64,
    #[serde(default, rename = "waypoint")]
    pub waypoints: Vec<ScriptWaypoint>,
    #[serde(default, rename = "keyframe")]
    pub keyframes: Vec<TeleopKeyframe>,
}

pub enum ScenarioSource<'a> {
    Waypoints(&'a [ScriptWaypoint]),
    Teleop(TeleopProfile),
}

impl Scenario {
    fn default_settle() -> f64 {
        5.0
    }

    pub fn from_toml(text: &str) -> Result<Self, OperatorError> {
        toml::from_str(text).map_err(|e| OperatorError::Scenario(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, OperatorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OperatorError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks structure and reachability; returns the input source.
    pub fn validate(
        &self,
        geom: &LinkGeometry,
        limits: &JointLimits,
    ) -> Result<ScenarioSource<'_>, OperatorError> {
        if !(self.settle.is_finite() && self.settle >= 0.0) {
            return Err(OperatorError::Scenario(format!(
                "settle must be >= 0, got {}",
                self.settle
            )));
        }
        match (self.waypoints.is_empty(), self.keyframes.is_empty()) {
            (true, true) => Err(OperatorError::Scenario(
                "scenario has neither waypoints nor keyframes".into(),
            )),
            (false, false) => Err(OperatorError::Scenario(
                "scenario mixes waypoints and keyframes".into(),
            )),
            (false, true) => {
                validate_script(&self.waypoints, geom, limits)?;
                Ok(ScenarioSource::Waypoints(&self.waypoints))
            }
            (true, false) => {
                let mut prev = f64::NEG_INFINITY;
                for (index, k) in self.keyframes.iter().enumerate() {
                    if !(k.t.is_finite() && k.t > prev) {
                        return Err(OperatorError::Validation {
                            index,
                            reason: "keyframe times must be finite and strictly increasing".into(),
                        });
                    }
                    prev = k.t;
                }
                Ok(ScenarioSource::Teleop(TeleopProfile {
                    keyframes: self.keyframes.clone(),
                }))
            }
        }
    }
}

/// Rejects empty scripts, negative dwells and unreachable waypoints.
/// Waypoint indices in errors are 1-based.
pub fn validate_script(
    waypoints: &[ScriptWaypoint],
    geom: &LinkGeometry,
    limits: &JointLimits,
) -> Result<Vec<JointAngles>, OperatorError> {
    if waypoints.is_empty() {
        return Err(OperatorError::Scenario("script has no waypoints".into()));
    }
    waypoints
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let index = i + 1;
            if !(w.dwell.is_finite() && w.dwell >= 0.0) {
                return Err(OperatorError::Validation {
                    index,
                    reason: format!("dwell must be >= 0, got {}", w.dwell),
                });
            }
            ik_solve(geom, &w.target(), limits).map_err(|e| OperatorError::Validation {
                index,
                reason: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    joints: JointAngles,
    start_tick: u64,
    travel_ticks: u64,
    dwell_ticks: u64,
    grip_before: f64,
    grip_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlayerOutput {
    Command(OperatorCommand),
    /// Emitted once after the last waypoint's dwell, then repeated.
    EndOfScript,
}

/// Deterministic schedule of joint targets for a waypoint script.
///
/// Each waypoint gets a travel phase, long enough for the slowest joint to
/// arrive at the configured servo rate, followed by its dwell. Grip actions
/// take effect at the start of the dwell. Every waypoint occupies at least one
/// tick.
#[derive(Debug, Clone)]
pub struct ScriptPlayer {
    segments: Vec<Segment>,
    dt: f64,
    end_tick: u64,
}

impl ScriptPlayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        waypoints: &[ScriptWaypoint],
        geom: &LinkGeometry,
        limits: &JointLimits,
        start: &JointAngles,
        start_grip: f64,
        joint_rate: f64,
        dt: f64,
    ) -> Result<Self, OperatorError> {
        let solutions = validate_script(waypoints, geom, limits)?;
        let mut segments = Vec::with_capacity(waypoints.len());
        let mut prev = *start;
        let mut grip = start_grip;
        let mut tick = 0u64;
        let step = joint_rate * dt;
        for (w, q) in waypoints.iter().zip(solutions) {
            let q = q.with_wrist_roll(start.wrist_roll);
            let travel = prev
                .as_array()
                .iter()
                .zip(q.as_array())
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max);
            // One extra tick absorbs rounding in the servo's arrival step.
            let travel_ticks = if travel > 0.0 {
                (travel / step).ceil() as u64 + 1
            } else {
                0
            };
            let dwell_ticks = (w.dwell / dt).round() as u64;
            let grip_after = match w.action {
                WaypointAction::None => grip,
                WaypointAction::Grasp => 1.0,
                WaypointAction::Drop => 0.0,
            };
            let dwell_ticks = if travel_ticks + dwell_ticks == 0 { 1 } else { dwell_ticks };
            segments.push(Segment {
                joints: q,
                start_tick: tick,
                travel_ticks,
                dwell_ticks,
                grip_before: grip,
                grip_after,
            });
            tick += travel_ticks + dwell_ticks;
            prev = q;
            grip = grip_after;
        }
        Ok(Self {
            segments,
            dt,
            end_tick: tick,
        })
    }

    /// Number of ticks before the end marker.
    pub fn len_ticks(&self) -> u64 {
        self.end_tick
    }

    /// Tick at which waypoint `index` (1-based) starts its dwell.
    pub fn dwell_start_tick(&self, index: usize) -> Option<u64> {
        self.segments
            .get(index.checked_sub(1)?)
            .map(|s| s.start_tick + s.travel_ticks)
    }

    /// Output for the zero-based tick `tick`, stamped at `tick * dt`.
    pub fn command_at(&self, tick: u64) -> PlayerOutput {
        if tick >= self.end_tick {
            return PlayerOutput::EndOfScript;
        }
        let i = self.segments.partition_point(|s| s.start_tick <= tick) - 1;
        let s = &self.segments[i];
        let travelling = tick < s.start_tick + s.travel_ticks;
        let (phase, grip) = if travelling {
            (ScriptPhase::Travel, s.grip_before)
        } else {
            (ScriptPhase::Dwell, s.grip_after)
        };
        PlayerOutput::Command(OperatorCommand {
            timestamp: tick as f64 * self.dt,
            grip_fraction: grip,
            kind: CommandKind::Script {
                joint_targets: s.joints,
                waypoint: i + 1,
                phase,
            },
        })
    }

    /// Commands up to and including the first end marker.
    pub fn iter(&self) -> impl Iterator<Item = PlayerOutput> + '_ {
        (0..=self.end_tick).map(|t| self.command_at(t))
    }
}

/// Grip-end pose for the given joints with the shoulder at the origin.
pub fn current_pose(geom: &LinkGeometry, joints: &JointAngles) -> PlanarPose {
    fk_grip(geom, Point2::ORIGIN, joints)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> OperatorSettings {
        OperatorSettings::default()
    }

    fn samples(shoulder: f64, elbow: f64, wrist: f64, flex: [f64; 5], t: f64) -> (TrackerSample, GloveSample) {
        (
            TrackerSample {
                shoulder_angle: shoulder,
                elbow_angle: elbow,
                timestamp: t,
            },
            GloveSample {
                flex,
                wrist_pitch: wrist,
                wrist_roll: 0.0,
                timestamp: t,
            },
        )
    }

    #[test]
    fn teleop_zero_input() {
        let (tr, gl) = samples(0.0, 0.0, 0.0, [0.0; 5], 1.0);
        let cmd = teleop_map(&tr, &gl, 1.0, &JointLimits::default(), &settings()).unwrap();
        assert_eq!(cmd.joint_targets(), JointAngles::ZERO);
        assert_eq!(cmd.grip_fraction, 0.0);
        assert_eq!(cmd.mode(), CommandMode::Teleop);
    }

    #[test]
    fn teleop_full_fist_closes_grip() {
        let (tr, gl) = samples(0.0, 0.0, 0.0, [1.0; 5], 1.0);
        let cmd = teleop_map(&tr, &gl, 1.0, &JointLimits::default(), &settings()).unwrap();
        assert_eq!(cmd.grip_fraction, 1.0);
    }

    #[test]
    fn teleop_clamps_to_limits() {
        let limits = JointLimits::default();
        let (tr, gl) = samples(3.0, -1.0, 0.0, [0.0; 5], 1.0);
        let cmd = teleop_map(&tr, &gl, 1.0, &limits, &settings()).unwrap();
        assert_eq!(cmd.joint_targets().theta, limits.theta.max);
        assert_eq!(cmd.joint_targets().beta, limits.beta.min);
    }

    #[test]
    fn teleop_stale_and_misaligned() {
        let (tr, gl) = samples(0.0, 0.0, 0.0, [0.0; 5], 1.0);
        let err = teleop_map(&tr, &gl, 1.25, &JointLimits::default(), &settings());
        assert!(matches!(err, Err(OperatorError::StaleInput { .. })));
        let gl2 = GloveSample { timestamp: 1.1, ..gl };
        let err = teleop_map(&tr, &gl2, 1.1, &JointLimits::default(), &settings());
        assert!(matches!(err, Err(OperatorError::Misaligned { .. })));
    }

    #[test]
    fn grip_mappings() {
        let flex = [0.0, 0.8, 0.2, 0.2, 0.3];
        assert!((GripMapping::Mean.reduce(&flex) - 0.3).abs() < 1e-15);
        assert_eq!(GripMapping::Max.reduce(&flex), 0.8);
        assert_eq!(GripMapping::IndexFinger.reduce(&flex), 0.8);
        assert_eq!(GripMapping::Mean.reduce(&[2.0; 5]), 1.0);
    }

    #[test]
    fn jog_forward_matches_ik() {
        let geom = LinkGeometry::default();
        let limits = JointLimits::default();
        let start = PlanarPose::new(0.5, 0.0, 0.0);
        let q0 = ik_solve(&geom, &start, &limits).unwrap();
        let out = jog_step(&start, &q0, CartesianStep { dx: 0.02, dz: 0.0 }, 0.0, &geom, &limits, &settings(), 0.0);
        let expected = ik_solve(&geom, &PlanarPose::new(0.52, 0.0, 0.0), &limits).unwrap();
        match out {
            JogOutcome::Accepted { command, pose } => {
                assert_eq!(command.joint_targets(), expected);
                assert_eq!(pose, PlanarPose::new(0.52, 0.0, 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jog_past_reach_is_rejected() {
        let geom = LinkGeometry::default();
        let limits = JointLimits::default();
        let q = JointAngles::new(-0.05, 0.1, 0.15);
        let pose = current_pose(&geom, &q);
        let out = jog_step(&pose, &q, CartesianStep { dx: 0.05, dz: 0.0 }, 0.0, &geom, &limits, &settings(), 0.0);
        assert_eq!(
            out,
            JogOutcome::Rejected {
                reason: JogRejection::Kinematics(KinematicsError::Unreachable {
                    x: pose.x + 0.05,
                    z: pose.z
                }),
                hold: q
            }
        );
    }

    #[test]
    fn jog_zero_step_is_identity() {
        let geom = LinkGeometry::default();
        let q = JointAngles::new(0.3, 1.0, 0.7).with_wrist_roll(0.2);
        let pose = current_pose(&geom, &q);
        let out = jog_step(&pose, &q, CartesianStep::default(), 0.4, &geom, &JointLimits::default(), &settings(), 2.0);
        let JogOutcome::Accepted { command, .. } = out else { panic!() };
        assert_eq!(command.joint_targets(), q);
    }

    #[test]
    fn jog_oversized_step_rejected() {
        let geom = LinkGeometry::default();
        let q = JointAngles::new(0.3, 1.0, 0.7);
        let pose = current_pose(&geom, &q);
        let out = jog_step(&pose, &q, CartesianStep { dx: 0.0, dz: -0.2 }, 0.0, &geom, &JointLimits::default(), &settings(), 0.0);
        assert!(matches!(out, JogOutcome::Rejected { reason: JogRejection::Operator(_), .. }));
    }

    fn wp(x: f64, z: f64, dwell: f64, action: WaypointAction) -> ScriptWaypoint {
        ScriptWaypoint { x, z, phi: 0.0, dwell, action }
    }

    #[test]
    fn single_waypoint_at_current_pose() {
        let geom = LinkGeometry::default();
        let limits = JointLimits::default();
        let q = ik_solve(&geom, &PlanarPose::new(0.5, -0.1, 0.0), &limits).unwrap();
        let player = ScriptPlayer::new(&[wp(0.5, -0.1, 0.0, WaypointAction::None)], &geom, &limits, &q, 0.0, 3.0, 0.01).unwrap();
        let out: Vec<_> = player.iter().collect();
        assert_eq!(out.len(), 2);
        assert!(matches!(
            out[0],
            PlayerOutput::Command(OperatorCommand { kind: CommandKind::Script { phase: ScriptPhase::Dwell, waypoint: 1, .. }, .. })
        ));
        assert_eq!(out[1], PlayerOutput::EndOfScript);
    }

    #[test]
    fn dwell_frames_are_counted_at_tick_rate() {
        let geom = LinkGeometry::default();
        let limits = JointLimits::default();
        let start = ik_solve(&geom, &PlanarPose::new(0.5, -0.1, 0.0), &limits).unwrap();
        let script = [
            wp(0.5, -0.1, 1.0, WaypointAction::None),
            wp(0.55, -0.2, 1.0, WaypointAction::Grasp),
        ];
        let player = ScriptPlayer::new(&script, &geom, &limits, &start, 0.0, 3.0, 0.01).unwrap();
        let mut holds = [0usize; 3];
        for out in player.iter() {
            if let PlayerOutput::Command(OperatorCommand {
                kind: CommandKind::Script { waypoint, phase: ScriptPhase::Dwell, .. },
                ..
            }) = out
            {
                holds[waypoint] += 1;
            }
        }
        assert!(holds[1].abs_diff(100) <= 1, "{holds:?}");
        assert!(holds[2].abs_diff(100) <= 1, "{holds:?}");
    }

    #[test]
    fn grasp_action_applies_during_dwell_only() {
        let geom = LinkGeometry::default();
        let limits = JointLimits::default();
        let start = ik_solve(&geom, &PlanarPose::new(0.5, -0.1, 0.0), &limits).unwrap();
        let script = [wp(0.55, -0.2, 0.5, WaypointAction::Grasp)];
        let player = ScriptPlayer::new(&script, &geom, &limits, &start, 0.0, 3.0, 0.01).unwrap();
        let dwell = player.dwell_start_tick(1).unwrap();
        assert!(dwell > 0);
        let PlayerOutput::Command(c) = player.command_at(dwell - 1) else { panic!() };
        assert_eq!(c.grip_fraction, 0.0);
        let PlayerOutput::Command(c) = player.command_at(dwell) else { panic!() };
        assert_eq!(c.grip_fraction, 1.0);
    }

    #[test]
    fn unreachable_waypoint_reports_index() {
        let geom = LinkGeometry::default();
        let script = [wp(0.5, 0.0, 0.0, WaypointAction::None), wp(3.0, 0.0, 0.0, WaypointAction::None)];
        let err = validate_script(&script, &geom, &JointLimits::default()).unwrap_err();
        assert!(matches!(err, OperatorError::Validation { index: 2, .. }), "{err:?}");
        assert!(validate_script(&[], &geom, &JointLimits::default()).is_err());
    }

    #[test]
    fn profile_interpolates_and_holds_ends() {
        let k = |t, s| TeleopKeyframe { t, shoulder: s, elbow: 0.0, wrist_pitch: 0.0, wrist_roll: 0.0, flex: [s; 5] };
        let p = TeleopProfile { keyframes: vec![k(0.0, 0.0), k(2.0, 1.0)] };
        assert_eq!(p.samples_at(-1.0).0.shoulder_angle, 0.0);
        assert_eq!(p.samples_at(1.0).0.shoulder_angle, 0.5);
        assert_eq!(p.samples_at(1.0).1.flex, [0.5; 5]);
        assert_eq!(p.samples_at(5.0).0.shoulder_angle, 1.0);
        assert_eq!(p.samples_at(5.0).0.timestamp, 5.0);
    }

    #[test]
    fn scenario_parsing() {
        let text = r#"
            name = "demo"
            [object]
            x = 0.5
            z = -0.3
            [[waypoint]]
            x = 0.5
            z = -0.2
            dwell = 1.0
            [[waypoint]]
            x = 0.5
            z = -0.3
            action = "grasp"
        "#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.waypoints.len(), 2);
        assert_eq!(s.waypoints[1].action, WaypointAction::Grasp);
        assert_eq!(s.object.unwrap().size, 0.5);
        assert!(matches!(
            s.validate(&LinkGeometry::default(), &JointLimits::default()),
            Ok(ScenarioSource::Waypoints(_))
        ));
        assert!(Scenario::from_toml("bogus = 1").is_err());
        let empty = Scenario::from_toml("").unwrap();
        assert!(empty.validate(&LinkGeometry::default(), &JointLimits::default()).is_err());
    }
}
