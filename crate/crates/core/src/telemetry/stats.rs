//! Attitude deviation statistics over a time window of a session.
//!
//! The setpoint for roll and pitch is level flight (0 rad), so the deviation
//! is the signal itself. Standard deviation is the population form (divide by
//! N). Outputs are in degrees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::SessionRecord;
use super::TelemetryFrame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no frames in window [{from}, {to}]")]
    EmptyWindow { from: f64, to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Roll,
    Pitch,
}

impl Signal {
    pub const ALL: [Signal; 2] = [Signal::Roll, Signal::Pitch];

    pub fn name(&self) -> &'static str {
        match self {
            Signal::Roll => "roll",
            Signal::Pitch => "pitch",
        }
    }

    /// Radians.
    pub fn value(&self, frame: &TelemetryFrame) -> f64 {
        match self {
            Signal::Roll => frame.drone.roll,
            Signal::Pitch => frame.drone.pitch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub max_abs: f64,
    pub std_dev: f64,
    pub mean: f64,
    pub samples: usize,
}

/// Single-pass (Welford) statistics of already-computed deviations.
pub fn deviation_stats<I: IntoIterator<Item = f64>>(deviations: I) -> Option<DeviationStats> {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut max_abs = 0.0f64;
    for x in deviations {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
        max_abs = max_abs.max(x.abs());
    }
    (n > 0).then(|| DeviationStats {
        max_abs,
        std_dev: (m2 / n as f64).max(0.0).sqrt(),
        mean,
        samples: n,
    })
}

/// Statistics of `signal` over frames with `from <= t <= to`.
pub fn compute_stats(
    record: &SessionRecord,
    signal: Signal,
    window: (f64, f64),
) -> Result<DeviationStats, StatsError> {
    let (from, to) = window;
    deviation_stats(
        record
            .frames
            .iter()
            .filter(|f| f.t >= from && f.t <= to)
            .map(|f| signal.value(f).to_degrees()),
    )
    .ok_or(StatsError::EmptyWindow { from, to })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_zero_signal() {
        let s = deviation_stats([0.0; 10]).unwrap();
        assert_eq!((s.max_abs, s.std_dev, s.mean), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_is_none() {
        assert!(deviation_stats(std::iter::empty()).is_none());
    }

    #[test]
    fn small_example() {
        let s = deviation_stats([1.0, -3.0, 2.0]).unwrap();
        assert_eq!(s.max_abs, 3.0);
        assert!(s.mean.abs() < 1e-15);
        assert!((s.std_dev - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
