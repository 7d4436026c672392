//! Plain-text session report: attitude deviation statistics, the event
//! timeline and peak joint torques, optionally next to the values published
//! for the physical prototype.

use std::fmt::{self, Write as _};

use crate::actuation::ContactKind;
use crate::telemetry::protocol::CommandBody;
use crate::telemetry::record::SessionRecord;
use crate::telemetry::stats::{compute_stats, DeviationStats, Signal, StatsError};

/// Published attitude figures for one flight test, degrees. Missing entries
/// were not reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedReference {
    pub label: &'static str,
    pub roll_max: Option<f64>,
    pub roll_std: Option<f64>,
    pub pitch_max: Option<f64>,
    pub pitch_std: Option<f64>,
}

impl PublishedReference {
    /// Waypoint flight under GUI control.
    pub const WAYPOINT_FLIGHT: Self = Self {
        label: "waypoint flight",
        roll_max: Some(5.22),
        roll_std: Some(0.99),
        pitch_max: Some(9.38),
        pitch_std: Some(3.51),
    };

    /// Grasp and release under VR teleoperation.
    pub const VR_GRASP: Self = Self {
        label: "VR grasp and release",
        roll_max: None,
        roll_std: Some(0.83),
        pitch_max: Some(7.15),
        pitch_std: Some(2.03),
    };

    /// Picks the test that matches how the session was driven.
    pub fn for_record(record: &SessionRecord) -> Option<Self> {
        record.commands.iter().find_map(|c| match c.command.body {
            CommandBody::Script { .. } => Some(Self::WAYPOINT_FLIGHT),
            CommandBody::Teleop { .. } => Some(Self::VR_GRASP),
            _ => None,
        })
    }

    fn for_signal(&self, signal: Signal) -> (Option<f64>, Option<f64>) {
        match signal {
            Signal::Roll => (self.roll_max, self.roll_std),
            Signal::Pitch => (self.pitch_max, self.pitch_std),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimelineEntry {
    Contact {
        t: f64,
        kind: ContactKind,
        force: f64,
    },
    /// A script waypoint changed the grip command.
    Action {
        t: f64,
        waypoint: usize,
        grip: f64,
    },
}

impl TimelineEntry {
    pub fn t(&self) -> f64 {
        match self {
            TimelineEntry::Contact { t, .. } | TimelineEntry::Action { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub window: (f64, f64),
    pub frames: usize,
    pub roll: DeviationStats,
    pub pitch: DeviationStats,
    /// Peak |t1|, |t2|, |t3| in the window, N·m.
    pub max_torques: [f64; 3],
    pub timeline: Vec<TimelineEntry>,
    pub reference: Option<PublishedReference>,
}

/// Builds the report over `window`, or the whole record when `None`.
pub fn build_report(
    record: &SessionRecord,
    window: Option<(f64, f64)>,
    reference: Option<PublishedReference>,
) -> Result<Report, StatsError> {
    let window = window.unwrap_or((0.0, record.duration()));
    let roll = compute_stats(record, Signal::Roll, window)?;
    let pitch = compute_stats(record, Signal::Pitch, window)?;
    let in_window = |t: f64| t >= window.0 && t <= window.1;

    let mut max_torques = [0.0f64; 3];
    for f in record.frames.iter().filter(|f| in_window(f.t)) {
        max_torques[0] = max_torques[0].max(f.torques.t1.abs());
        max_torques[1] = max_torques[1].max(f.torques.t2.abs());
        max_torques[2] = max_torques[2].max(f.torques.t3.abs());
    }

    let dt = record.config.dt();
    let mut timeline = Vec::new();
    let mut grip = 0.0;
    for c in &record.commands {
        if let (CommandBody::Script { waypoint, .. }, Some(g)) = (c.command.body, c.command.grip) {
            if g != grip {
                timeline.push(TimelineEntry::Action {
                    t: c.tick as f64 * dt,
                    waypoint,
                    grip: g,
                });
            }
            grip = g;
        }
    }
    timeline.extend(record.contact_events().map(|e| TimelineEntry::Contact {
        t: e.timestamp,
        kind: e.kind,
        force: e.force,
    }));
    timeline.retain(|e| in_window(e.t()));
    // Stable: an action sorts before the contact events it causes.
    timeline.sort_by(|a, b| a.t().total_cmp(&b.t()));

    Ok(Report {
        window,
        frames: roll.samples,
        roll,
        pitch,
        max_torques,
        timeline,
        reference,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "window {:.3} s .. {:.3} s, {} frames",
            self.window.0, self.window.1, self.frames
        )?;
        writeln!(f)?;
        let mut header = format!("{:<8}{:>10}{:>10}{:>10}", "signal", "max_abs", "std", "mean");
        if let Some(r) = &self.reference {
            write!(header, "   published ({}): max / std", r.label)?;
        }
        writeln!(f, "{header}")?;
        for (signal, s) in [(Signal::Roll, &self.roll), (Signal::Pitch, &self.pitch)] {
            write!(
                f,
                "{:<8}{:>10.3}{:>10.3}{:>10.3}",
                signal.name(),
                s.max_abs,
                s.std_dev,
                s.mean
            )?;
            if let Some(r) = &self.reference {
                let (max, std) = r.for_signal(signal);
                write!(f, "   {} / {}", opt(max), opt(std))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "(degrees, deviation from the level setpoint)")?;
        writeln!(f)?;
        writeln!(
            f,
            "max torque  t1 {:.3}  t2 {:.3}  t3 {:.3}  N·m",
            self.max_torques[0], self.max_torques[1], self.max_torques[2]
        )?;
        writeln!(f)?;
        writeln!(f, "events")?;
        if self.timeline.is_empty() {
            writeln!(f, "  none")?;
        }
        for e in &self.timeline {
            match e {
                TimelineEntry::Contact { t, kind, force } => {
                    writeln!(f, "  {t:>9.3}  {:<8} force {force:.3}", kind.as_str())?
                }
                TimelineEntry::Action { t, waypoint, grip } => {
                    let what = if *grip == 0.0 {
                        "drop".to_string()
                    } else if *grip == 1.0 {
                        "grasp".to_string()
                    } else {
                        format!("grip {grip:.2}")
                    };
                    writeln!(f, "  {t:>9.3}  [waypoint {waypoint}] {what}")?
                }
            }
        }
        Ok(())
    }
}
