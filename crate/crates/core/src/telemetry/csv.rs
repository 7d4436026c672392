//! CSV export of a session for plotting, one row per frame.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::SessionRecord;

pub const CSV_COLUMNS: [&str; 11] = [
    "t", "x_grip", "z_grip", "t1", "t2", "t3", "roll_deg", "pitch_deg", "force_l", "force_r", "event",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("record has no frames")]
    EmptyRecord,
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] ::csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub t: f64,
    pub x_grip: f64,
    pub z_grip: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub force_l: f64,
    pub force_r: f64,
    /// Contact event kinds raised in this frame, `;`-separated.
    pub event: String,
}

/// Nine significant digits, written without an exponent where possible.
fn sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    rounded.to_string()
}

pub fn write_csv<W: Write>(record: &SessionRecord, out: W) -> Result<(), CsvError> {
    if record.is_empty() {
        return Err(CsvError::EmptyRecord);
    }
    let mut w = ::csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for f in &record.frames {
        let events: Vec<&str> = f.contact_events().map(|e| e.kind.as_str()).collect();
        let nums = [
            f.t,
            f.grip_pose.x,
            f.grip_pose.z,
            f.torques.t1,
            f.torques.t2,
            f.torques.t3,
            f.drone.roll.to_degrees(),
            f.drone.pitch.to_degrees(),
            f.forces.left,
            f.forces.right,
        ];
        let mut row: Vec<String> = nums.iter().map(|v| sig9(*v)).collect();
        row.push(events.join(";"));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| CsvError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn export_csv(record: &SessionRecord, path: &Path) -> Result<(), CsvError> {
    let io_err = |source| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    if record.is_empty() {
        return Err(CsvError::EmptyRecord);
    }
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_csv(record, std::io::BufWriter::new(file))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, CsvError> {
    let mut r = ::csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(CsvError::from)).collect()
}
