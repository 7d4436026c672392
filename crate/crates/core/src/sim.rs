//! The digital twin: one deterministic fixed-step loop over servos, gripper,
//! contact detection, static torques and the airframe.

use std::collections::VecDeque;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{
    grip_force_model, step_servos, ContactDetector, ContactKind, ContactPhase, GripperState,
    ServoBank,
};
use crate::config::Config;
use crate::drone::{arm_disturbance, step_drone, ArmDisturbance, AttitudeSetpoint, DroneError, DroneState};
use crate::kinematics::{
    fk_grip, static_torques, JointAngles, JointLimits, LinkGeometry, PlanarPose, Point2,
};
use crate::operator::{jog_step, CartesianStep, JogOutcome, SceneObject};
use crate::telemetry::protocol::{CommandBody, WireCommand};
use crate::telemetry::{BarForces, DroneSummary, FrameEvent, HapticEvent, TelemetryFrame};

/// Haptic intensity changes smaller than this are not re-sent.
const HAPTIC_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Drone(#[from] DroneError),
    #[error("invalid scene: {0}")]
    Scene(String),
}

/// Initial conditions that are not part of the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneSetup {
    #[serde(default)]
    pub object: Option<SceneObject>,
    #[serde(default)]
    pub initial_joints: JointAngles,
}

/// A command as it entered the loop; `tick` is the first tick that could see it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordedCommand {
    pub tick: u64,
    pub command: WireCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Idle,
    Teleop,
    Jog,
    Script,
    /// Frozen by a hold command or by stale teleoperation input.
    Held,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ObjectState {
    spec: SceneObject,
    position: Point2,
    attached: bool,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    config: Config,
    scene: SceneSetup,
    geom: LinkGeometry,
    limits: JointLimits,
    dt: f64,
    tick: u64,
    latency_ticks: u64,
    servos: ServoBank,
    detector: ContactDetector,
    gripper: GripperState,
    drone: DroneState,
    setpoint: AttitudeSetpoint,
    disturbance: ArmDisturbance,
    object: Option<ObjectState>,
    targets: JointAngles,
    grip_target: f64,
    jog_pose: PlanarPose,
    mode: ControlMode,
    last_teleop_tick: u64,
    pending: VecDeque<(u64, WireCommand)>,
    log: Vec<RecordedCommand>,
    rejected: u64,
    haptic_level: f64,
    rng: ChaCha8Rng,
}

impl Simulation {
    pub fn new(config: &Config, scene: &SceneSetup) -> Result<Self, SimError> {
        let geom = config.links();
        let limits = config.joint_limits();
        if !scene.initial_joints.is_finite() || !limits.contains(&scene.initial_joints) {
            return Err(SimError::Scene("initial joints are outside the joint limits".into()));
        }
        let q0 = scene.initial_joints;
        let masses = config.mass;
        let torques = static_torques(&geom, &masses, &q0, false);
        let setpoint = config.hover.setpoint();
        let drone = DroneState {
            yaw: setpoint.yaw,
            ..DroneState::hovering_at(setpoint.position)
        };
        let dt = config.dt();
        let object = scene.object.map(|spec| ObjectState {
            spec,
            position: spec.position(),
            attached: false,
        });
        Ok(Self {
            geom,
            limits,
            dt,
            tick: 0,
            latency_ticks: (config.telemetry.command_latency / dt).round() as u64,
            servos: ServoBank::new(&q0, config.servo.max_rate, config.servo.gripper_rate),
            detector: ContactDetector::new(
                config.gripper.contact_threshold,
                config.gripper.grasp_fraction_min,
            ),
            gripper: GripperState::default(),
            drone,
            setpoint,
            disturbance: ArmDisturbance::settled(&torques, 0.0),
            object,
            targets: q0,
            grip_target: 0.0,
            jog_pose: fk_grip(&geom, Point2::ORIGIN, &q0),
            mode: ControlMode::Idle,
            last_teleop_tick: 0,
            pending: VecDeque::new(),
            log: Vec::new(),
            rejected: 0,
            haptic_level: 0.0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config: config.clone(),
            scene: *scene,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn scene(&self) -> &SceneSetup {
        &self.scene
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of completed steps.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn joints(&self) -> JointAngles {
        self.servos.positions()
    }

    pub fn joint_targets(&self) -> JointAngles {
        self.targets
    }

    pub fn grip_target(&self) -> f64 {
        self.grip_target
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    pub fn drone(&self) -> &DroneState {
        &self.drone
    }

    pub fn contact_phase(&self) -> ContactPhase {
        self.detector.phase()
    }

    pub fn object_attached(&self) -> bool {
        self.object.is_some_and(|o| o.attached)
    }

    /// Jog commands rejected so far.
    pub fn rejected_commands(&self) -> u64 {
        self.rejected
    }

    /// Every command submitted so far, in order.
    pub fn command_log(&self) -> &[RecordedCommand] {
        &self.log
    }

    /// Queues a command. It takes effect on the next step, or later when a
    /// command latency is configured. Commands are never dropped.
    pub fn submit(&mut self, command: WireCommand) {
        let tick = self.tick + 1;
        self.log.push(RecordedCommand { tick, command });
        self.pending.push_back((tick + self.latency_ticks, command));
    }

    fn apply(&mut self, cmd: &WireCommand) {
        if let Some(g) = cmd.grip {
            if g.is_finite() {
                self.grip_target = g.clamp(0.0, 1.0);
            }
        }
        match cmd.body {
            CommandBody::Teleop { joint_targets } => {
                if !joint_targets.is_finite() {
                    self.rejected += 1;
                    return;
                }
                self.targets = self.limits.clamp(&joint_targets);
                self.jog_pose = fk_grip(&self.geom, Point2::ORIGIN, &self.targets);
                self.mode = ControlMode::Teleop;
                self.last_teleop_tick = self.tick;
            }
            CommandBody::Jog { dx, dz } => {
                let outcome = jog_step(
                    &self.jog_pose,
                    &self.targets,
                    CartesianStep { dx, dz },
                    self.grip_target,
                    &self.geom,
                    &self.limits,
                    &self.config.operator,
                    cmd.t,
                );
                match outcome {
                    JogOutcome::Accepted { command, pose } => {
                        self.targets = command.joint_targets();
                        self.jog_pose = pose;
                    }
                    JogOutcome::Rejected { reason, .. } => {
                        log::debug!("jog rejected: {reason}");
                        self.rejected += 1;
                    }
                }
                self.mode = ControlMode::Jog;
            }
            CommandBody::Script { joint_targets, .. } => {
                if !joint_targets.is_finite() {
                    self.rejected += 1;
                    return;
                }
                self.targets = self.limits.clamp(&joint_targets);
                self.jog_pose = fk_grip(&self.geom, Point2::ORIGIN, &self.targets);
                self.mode = ControlMode::Script;
            }
            CommandBody::Hold => self.hold(),
        }
    }

    fn hold(&mut self) {
        self.targets = self.servos.positions();
        self.jog_pose = fk_grip(&self.geom, Point2::ORIGIN, &self.targets);
        self.mode = ControlMode::Held;
    }

    /// Advances one tick and returns the resulting frame.
    pub fn step(&mut self) -> Result<TelemetryFrame, SimError> {
        self.tick += 1;
        let t = self.time();

        while self.pending.front().is_some_and(|(at, _)| *at <= self.tick) {
            let (_, cmd) = self.pending.pop_front().unwrap();
            self.apply(&cmd);
        }
        if self.mode == ControlMode::Teleop {
            let age = (self.tick - self.last_teleop_tick) as f64 * self.dt;
            if age > self.config.operator.stale_window {
                log::debug!("teleop input stale after {age:.3} s, holding");
                self.hold();
            }
        }

        step_servos(&mut self.servos, &self.targets, self.grip_target, self.dt);
        let joints = self.servos.positions();
        let pose = fk_grip(&self.geom, Point2::ORIGIN, &joints);
        let fraction = self.servos.grip_fraction();

        let within = match &self.object {
            Some(o) => {
                o.attached || o.position.distance(&pose.position()) <= self.config.gripper.capture_radius
            }
            None => false,
        };
        let (mut left, mut right) = match (&self.object, within) {
            (Some(o), true) => grip_force_model(fraction, o.spec.size, self.config.gripper.stiffness),
            _ => (0.0, 0.0),
        };
        let noise = self.config.gripper.force_noise;
        if noise > 0.0 && (left > 0.0 || right > 0.0) {
            left = (left + self.rng.random_range(-noise..=noise)).clamp(0.0, 1.0);
            right = (right + self.rng.random_range(-noise..=noise)).clamp(0.0, 1.0);
        }
        self.gripper = GripperState {
            fraction,
            bar_force_left: left,
            bar_force_right: right,
        };

        let contact_events = self.detector.detect_contact(t, &self.gripper, within);
        if let Some(o) = self.object.as_mut() {
            for e in &contact_events {
                match e.kind {
                    ContactKind::Grasp => o.attached = true,
                    ContactKind::Release | ContactKind::Drop => o.attached = false,
                    ContactKind::Contact => {}
                }
            }
            if o.attached {
                o.position = pose.position();
            }
        }
        let attached = self.object_attached();

        let masses = self.config.mass;
        let torques = static_torques(&self.geom, &masses, &joints, attached);
        self.disturbance = arm_disturbance(
            &self.geom,
            &joints,
            &torques,
            &masses,
            attached,
            &self.disturbance,
            &self.config.drone,
            self.dt,
        );
        self.drone = step_drone(
            &self.drone,
            &self.setpoint,
            &self.disturbance,
            &self.config.drone,
            self.dt,
        )?;

        let mut events: Vec<FrameEvent> = contact_events.into_iter().map(FrameEvent::Contact).collect();
        let intensity = if self.detector.phase() == ContactPhase::Free {
            0.0
        } else {
            self.gripper.max_force()
        };
        let switched = (intensity > 0.0) != (self.haptic_level > 0.0);
        if switched || (intensity - self.haptic_level).abs() >= HAPTIC_RESOLUTION {
            events.push(FrameEvent::Haptic(HapticEvent {
                timestamp: t,
                intensity,
            }));
            self.haptic_level = intensity;
        }

        Ok(TelemetryFrame {
            t,
            tick: self.tick,
            drone: DroneSummary::from(&self.drone),
            joints,
            grip_fraction: fraction,
            grip_pose: pose,
            torques,
            forces: BarForces { left, right },
            events,
        })
    }
}
