//! Deterministic digital twin of a quadrotor carrying a teleoperated 4-DoF
//! arm: kinematics, servo and gripper actuation, contact events, a hover
//! model disturbed by the arm, operator input modes, and the telemetry
//! protocol, recorder and statistics built around them.

pub mod actuation;
pub mod config;
pub mod drone;
pub mod kinematics;
pub mod operator;
pub mod replay;
pub mod report;
pub mod sim;
pub mod telemetry;

pub use config::Config;
pub use sim::{SceneSetup, Simulation};
