//! Headless scenario runs: a waypoint script or a teleoperation profile is
//! fed through the simulation tick by tick and recorded.

use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::kinematics::{ik_solve, JointAngles};
use crate::operator::{
    teleop_map, OperatorCommand, OperatorError, PlayerOutput, Scenario, ScenarioSource,
    ScriptPlayer, TeleopProfile,
};
use crate::sim::{SceneSetup, SimError, Simulation};
use crate::telemetry::protocol::WireCommand;
use crate::telemetry::record::SessionRecord;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("start pose: {0}")]
    Start(String),
}

impl ReplayError {
    pub fn code(&self) -> &'static str {
        match self {
            ReplayError::Config(e) => Config::error_code(e),
            ReplayError::Operator(OperatorError::Validation { .. }) => "script_validation",
            ReplayError::Operator(_) => "script",
            ReplayError::Sim(_) => "simulation",
            ReplayError::Start(_) => "script_validation",
        }
    }
}

/// Runs `scenario` to completion, plus its settle time, and returns the
/// session record. The result depends only on the inputs.
pub fn run_scenario(config: &Config, scenario: &Scenario) -> Result<SessionRecord, ReplayError> {
    config.validate()?;
    let geom = config.links();
    let limits = config.joint_limits();
    let dt = config.dt();
    let settle_ticks = (scenario.settle / dt).round() as u64;

    match scenario.validate(&geom, &limits)? {
        ScenarioSource::Waypoints(waypoints) => {
            let start = match scenario.start {
                Some(pose) => {
                    ik_solve(&geom, &pose, &limits).map_err(|e| ReplayError::Start(e.to_string()))?
                }
                None => JointAngles::ZERO,
            };
            let player = ScriptPlayer::new(
                waypoints,
                &geom,
                &limits,
                &start,
                0.0,
                config.servo.max_rate,
                dt,
            )?;
            let scene = SceneSetup {
                object: scenario.object,
                initial_joints: start,
            };
            let mut sim = Simulation::new(config, &scene)?;
            let mut record = SessionRecord::new(config.clone(), scene);
            let mut last: Option<OperatorCommand> = None;
            let mut seq = 0;
            for tick in 0..player.len_ticks() {
                if let PlayerOutput::Command(cmd) = player.command_at(tick) {
                    // Only changes are sent; the servos keep the last target.
                    let changed = last.is_none_or(|l| {
                        l.kind != cmd.kind || l.grip_fraction != cmd.grip_fraction
                    });
                    if changed {
                        sim.submit(WireCommand::from_operator(&cmd, seq));
                        seq += 1;
                        last = Some(cmd);
                    }
                }
                record.push_frame(sim.step()?);
            }
            finish(sim, record, settle_ticks)
        }
        ScenarioSource::Teleop(profile) => run_profile(config, scenario, &profile, settle_ticks),
    }
}

fn run_profile(
    config: &Config,
    scenario: &Scenario,
    profile: &TeleopProfile,
    settle_ticks: u64,
) -> Result<SessionRecord, ReplayError> {
    let limits = config.joint_limits();
    let dt = config.dt();
    let first = profile.keyframes[0].t;
    let (tracker, glove) = profile.samples_at(first);
    let initial = teleop_map(&tracker, &glove, first, &limits, &config.operator)?;
    let scene = SceneSetup {
        object: scenario.object,
        initial_joints: initial.joint_targets(),
    };
    let mut sim = Simulation::new(config, &scene)?;
    let mut record = SessionRecord::new(config.clone(), scene);
    let ticks = ((profile.duration()) / dt).round() as u64 + 1;
    for tick in 0..ticks {
        // Profile time runs from the first keyframe; samples are always fresh.
        let now = first + tick as f64 * dt;
        let (tracker, glove) = profile.samples_at(now);
        let cmd = teleop_map(&tracker, &glove, now, &limits, &config.operator)?;
        sim.submit(WireCommand::from_operator(&cmd, tick));
        record.push_frame(sim.step()?);
    }
    finish(sim, record, settle_ticks)
}

fn finish(
    mut sim: Simulation,
    mut record: SessionRecord,
    settle_ticks: u64,
) -> Result<SessionRecord, ReplayError> {
    for _ in 0..settle_ticks {
        record.push_frame(sim.step()?);
    }
    record.commands = sim.command_log().to_vec();
    Ok(record)
}
