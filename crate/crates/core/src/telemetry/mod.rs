//! Frames, the wire protocol, frame fan-out, session records and statistics.

pub mod bus;
pub mod csv;
pub mod protocol;
pub mod record;
pub mod stats;
pub mod stream;

use serde::{Deserialize, Serialize};

use crate::actuation::{ContactEvent, ContactKind};
use crate::drone::DroneState;
use crate::kinematics::{JointAngles, JointTorques, PlanarPose};

/// Attitude and position summary of the airframe.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroneSummary {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl From<&DroneState> for DroneSummary {
    fn from(s: &DroneState) -> Self {
        Self {
            x: s.position[0],
            y: s.position[1],
            z: s.position[2],
            roll: s.roll,
            pitch: s.pitch,
            yaw: s.yaw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BarForces {
    pub left: f64,
    pub right: f64,
}

/// Vibration request for the operator's fingertips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapticEvent {
    pub timestamp: f64,
    /// 0 switches feedback off.
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FrameEvent {
    Contact(ContactEvent),
    Haptic(HapticEvent),
}

impl FrameEvent {
    pub fn timestamp(&self) -> f64 {
        match self {
            FrameEvent::Contact(e) => e.timestamp,
            FrameEvent::Haptic(e) => e.timestamp,
        }
    }

    pub fn contact_kind(&self) -> Option<ContactKind> {
        match self {
            FrameEvent::Contact(e) => Some(e.kind),
            FrameEvent::Haptic(_) => None,
        }
    }
}

/// Snapshot of the whole twin at one simulation tick.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TelemetryFrame {
    /// Simulation time, s.
    pub t: f64,
    pub tick: u64,
    pub drone: DroneSummary,
    pub joints: JointAngles,
    pub grip_fraction: f64,
    pub grip_pose: PlanarPose,
    pub torques: JointTorques,
    pub forces: BarForces,
    /// Events raised since the previous frame, in order.
    #[serde(default)]
    pub events: Vec<FrameEvent>,
}

impl TelemetryFrame {
    pub fn contact_events(&self) -> impl Iterator<Item = &ContactEvent> {
        self.events.iter().filter_map(|e| match e {
            FrameEvent::Contact(c) => Some(c),
            FrameEvent::Haptic(_) => None,
        })
    }
}

/// Frames were lost between the previous delivered frame and the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMarker {
    pub dropped: u64,
    /// Time of the newest dropped frame.
    pub last_dropped_t: f64,
}
