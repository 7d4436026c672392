use aerotwin_core::actuation::{ContactEvent, ContactKind};
use aerotwin_core::kinematics::{JointTorques, PlanarPose};
use aerotwin_core::telemetry::csv::*;
use aerotwin_core::telemetry::record::SessionRecord;
use aerotwin_core::telemetry::{BarForces, DroneSummary, FrameEvent, TelemetryFrame};
use aerotwin_core::{Config, SceneSetup};

fn three_frames() -> SessionRecord {
    let mut r = SessionRecord::new(Config::default(), SceneSetup::default());
    for k in 1..=3u64 {
        let x = k as f64;
        r.push_frame(TelemetryFrame {
            t: x * 0.01,
            tick: k,
            drone: DroneSummary {
                roll: 0.012345678912345 * x,
                pitch: -std::f64::consts::PI / 7.0 * x,
                ..Default::default()
            },
            grip_pose: PlanarPose::new(0.7400000001 / x, 1.0 / 3.0, 0.0),
            torques: JointTorques {
                t1: 5.299244279 * x,
                t2: 1e-7 / x,
                t3: -123456.789,
            },
            forces: BarForces {
                left: 0.1 * x,
                right: 0.0,
            },
            events: if k == 2 {
                vec![
                    FrameEvent::Contact(ContactEvent {
                        timestamp: 0.02,
                        kind: ContactKind::Contact,
                        force: 0.2,
                    }),
                    FrameEvent::Contact(ContactEvent {
                        timestamp: 0.02,
                        kind: ContactKind::Grasp,
                        force: 0.2,
                    }),
                ]
            } else {
                Vec::new()
            },
            ..Default::default()
        });
    }
    r
}

fn same_9(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 5e-9 * a.abs().max(b.abs())
}

#[test]
fn header_plus_one_line_per_frame() {
    let mut out = Vec::new();
    write_csv(&three_frames(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "t,x_grip,z_grip,t1,t2,t3,roll_deg,pitch_deg,force_l,force_r,event"
    );
    assert!(lines[1].ends_with(','), "{}", lines[1]);
    assert!(lines[2].ends_with(",contact;grasp"), "{}", lines[2]);
}

#[test]
fn reimport_matches_to_nine_digits() {
    let rec = three_frames();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    export_csv(&rec, &path).unwrap();
    let rows = read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    for (row, f) in rows.iter().zip(&rec.frames) {
        let pairs = [
            (row.t, f.t),
            (row.x_grip, f.grip_pose.x),
            (row.z_grip, f.grip_pose.z),
            (row.t1, f.torques.t1),
            (row.t2, f.torques.t2),
            (row.t3, f.torques.t3),
            (row.roll_deg, f.drone.roll.to_degrees()),
            (row.pitch_deg, f.drone.pitch.to_degrees()),
            (row.force_l, f.forces.left),
            (row.force_r, f.forces.right),
        ];
        for (i, (a, b)) in pairs.into_iter().enumerate() {
            assert!(same_9(a, b), "column {i}: {a} vs {b}");
        }
    }
    assert_eq!(rows[0].event, "");
    assert_eq!(rows[1].event, "contact;grasp");
}

#[test]
fn empty_record_is_an_error() {
    let r = SessionRecord::new(Config::default(), SceneSetup::default());
    assert!(matches!(write_csv(&r, Vec::new()), Err(CsvError::EmptyRecord)));
}

#[test]
fn unwritable_path_surfaces_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = export_csv(&three_frames(), &dir.path().join("missing/run.csv")).unwrap_err();
    assert!(matches!(err, CsvError::Io { .. } | CsvError::Csv(_)), "{err:?}");
}
