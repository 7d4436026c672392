//! Servo tracking, gripper closure and bar-force contact detection.

use serde::{Deserialize, Serialize};

use crate::kinematics::JointAngles;

/// Rate-limited position tracker standing in for one servo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoState {
    pub position: f64,
    pub target: f64,
    /// Units per second.
    pub max_rate: f64,
}

impl ServoState {
    pub fn new(position: f64, max_rate: f64) -> Self {
        Self {
            position,
            target: position,
            max_rate,
        }
    }

    /// Moves toward `target` by at most `max_rate * dt`, landing exactly on
    /// the target once it is within one step.
    pub fn step(&mut self, dt: f64) {
        let max_step = self.max_rate * dt;
        let delta = self.target - self.position;
        if delta.abs() <= max_step {
            self.position = self.target;
        } else {
            self.position += max_step.copysign(delta);
        }
    }

    pub fn at_target(&self) -> bool {
        self.position == self.target
    }
}

/// Bar forces are normalized to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GripperState {
    /// 0 = open, 1 = closed.
    pub fraction: f64,
    pub bar_force_left: f64,
    pub bar_force_right: f64,
}

impl GripperState {
    pub fn max_force(&self) -> f64 {
        self.bar_force_left.max(self.bar_force_right)
    }
}

/// The four arm joints plus the gripper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoBank {
    pub joints: [ServoState; 4],
    pub gripper: ServoState,
}

impl ServoBank {
    pub fn new(initial: &JointAngles, joint_rate: f64, gripper_rate: f64) -> Self {
        let a = initial.as_array();
        Self {
            joints: a.map(|p| ServoState::new(p, joint_rate)),
            gripper: ServoState::new(0.0, gripper_rate),
        }
    }

    pub fn positions(&self) -> JointAngles {
        JointAngles::from_array(self.joints.map(|s| s.position))
    }

    pub fn targets(&self) -> JointAngles {
        JointAngles::from_array(self.joints.map(|s| s.target))
    }

    pub fn grip_fraction(&self) -> f64 {
        self.gripper.position
    }

    pub fn at_rest(&self) -> bool {
        self.joints.iter().all(ServoState::at_target) && self.gripper.at_target()
    }
}

/// Sets new targets and advances every servo by `dt`.
pub fn step_servos(bank: &mut ServoBank, targets: &JointAngles, fraction: f64, dt: f64) {
    debug_assert!(dt > 0.0, "dt must be positive");
    for (servo, target) in bank.joints.iter_mut().zip(targets.as_array()) {
        servo.target = target;
        servo.step(dt);
    }
    bank.gripper.target = fraction.clamp(0.0, 1.0);
    bank.gripper.step(dt);
    bank.gripper.position = bank.gripper.position.clamp(0.0, 1.0);
}

/// Linear bar-force model: zero until the jaws meet an object of normalized
/// width `object_size`, then `stiffness` times the extra closure, clamped to 1.
/// Both bars see the same force.
pub fn grip_force_model(fraction: f64, object_size: f64, stiffness: f64) -> (f64, f64) {
    let contact_at = 1.0 - object_size;
    if fraction <= contact_at {
        return (0.0, 0.0);
    }
    let f = (stiffness * (fraction - contact_at)).clamp(0.0, 1.0);
    (f, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    Contact,
    Grasp,
    Release,
    Drop,
}

impl ContactKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContactKind::Contact => "contact",
            ContactKind::Grasp => "grasp",
            ContactKind::Release => "release",
            ContactKind::Drop => "drop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "contact" => ContactKind::Contact,
            "grasp" => ContactKind::Grasp,
            "release" => ContactKind::Release,
            "drop" => ContactKind::Drop,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub timestamp: f64,
    pub kind: ContactKind,
    pub force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactPhase {
    #[default]
    Free,
    Touching,
    Grasped,
}

/// Turns bar forces into contact/grasp/release/drop events.
///
/// Per object the emitted sequence always matches
/// `(contact (grasp (release|drop))?)*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactDetector {
    pub threshold: f64,
    pub grasp_fraction_min: f64,
    phase: ContactPhase,
    last_timestamp: f64,
}

impl ContactDetector {
    pub fn new(threshold: f64, grasp_fraction_min: f64) -> Self {
        assert!(
            threshold > 0.0 && threshold < 1.0,
            "contact threshold must lie in (0, 1)"
        );
        Self {
            threshold,
            grasp_fraction_min,
            phase: ContactPhase::Free,
            last_timestamp: f64::NEG_INFINITY,
        }
    }

    pub fn phase(&self) -> ContactPhase {
        self.phase
    }

    pub fn is_grasping(&self) -> bool {
        self.phase == ContactPhase::Grasped
    }

    /// Feeds one sample and returns the events it triggers, in order.
    ///
    /// Timestamps must not decrease between calls.
    pub fn detect_contact(
        &mut self,
        timestamp: f64,
        gripper: &GripperState,
        object_within_jaws: bool,
    ) -> Vec<ContactEvent> {
        debug_assert!(timestamp >= self.last_timestamp, "timestamps went backwards");
        self.last_timestamp = timestamp;

        let thr = self.threshold;
        let left = gripper.bar_force_left > thr;
        let right = gripper.bar_force_right > thr;
        let force = gripper.max_force();
        let event = |kind| ContactEvent {
            timestamp,
            kind,
            force,
        };
        let mut out = Vec::new();

        if self.phase == ContactPhase::Free && (left || right) {
            out.push(event(ContactKind::Contact));
            self.phase = ContactPhase::Touching;
        }
        match self.phase {
            ContactPhase::Free => {}
            ContactPhase::Touching => {
                if left && right && object_within_jaws && gripper.fraction > self.grasp_fraction_min
                {
                    out.push(event(ContactKind::Grasp));
                    self.phase = ContactPhase::Grasped;
                } else if !left && !right {
                    self.phase = ContactPhase::Free;
                }
            }
            ContactPhase::Grasped => {
                if !object_within_jaws {
                    out.push(event(ContactKind::Drop));
                    self.phase = ContactPhase::Free;
                } else if !left && !right {
                    out.push(event(ContactKind::Release));
                    self.phase = ContactPhase::Free;
                }
            }
        }
        out
    }
}
