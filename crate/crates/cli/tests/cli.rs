use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use aerotwin_core::telemetry::record::SessionRecord;
use aerotwin_core::telemetry::stats::{compute_stats, Signal};

fn repo(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn aerotwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerotwin"))
        .args(args)
        .env_remove("AEROTWIN_PORT")
        .env("AEROTWIN_LOG", "error")
        .output()
        .unwrap()
}

fn assert_one_line_error(out: &Output, code: &str) {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<_> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    assert!(lines[0].starts_with(&format!("error[{code}]: ")), "{stderr}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn replay_is_deterministic_and_analyze_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let config = repo("configs/default.toml");
    let script = repo("scripts/nine_waypoints.toml");
    for out in [&a, &b] {
        let o = aerotwin(&["replay", "--config", s(&config), "--script", s(&script), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(stdout.contains("[waypoint 9] drop"), "{stdout}");
        assert!(stdout.contains("pitch"), "{stdout}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.csv").exists());
    let report = std::fs::read_to_string(dir.path().join("a.txt")).unwrap();
    assert!(report.contains("release"), "{report}");

    let o = aerotwin(&["analyze", "--record", s(&a), "--from", "2", "--to", "8"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let record = SessionRecord::load(&a).unwrap();
    let pitch = compute_stats(&record, Signal::Pitch, (2.0, 8.0)).unwrap();
    let line = text.lines().find(|l| l.starts_with("pitch")).unwrap();
    let expected = format!("{:>10.3}{:>10.3}{:>10.3}", pitch.max_abs, pitch.std_dev, pitch.mean);
    assert!(line.contains(&expected), "{line} vs {expected}");
}

#[test]
fn failures_are_single_coded_lines() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_one_line_error(&aerotwin(&["validate", "--config", s(&missing)]), "config_io");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[geometry]\nl1 = 0.3\nwingspan = 2\n").unwrap();
    assert_one_line_error(&aerotwin(&["validate", "--config", s(&bad)]), "config_parse");

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("r.json");
    assert_one_line_error(
        &aerotwin(&["replay", "--script", s(&empty), "--out", s(&out)]),
        "script",
    );

    let far = dir.path().join("far.toml");
    std::fs::write(&far, "[[waypoint]]\nx = 0.5\nz = 0.0\n[[waypoint]]\nx = 3.0\nz = 0.0\n").unwrap();
    let o = aerotwin(&["replay", "--script", s(&far), "--out", s(&out)]);
    assert_one_line_error(&o, "script_validation");
    assert!(String::from_utf8_lossy(&o.stderr).contains("waypoint 2"));

    let corrupt = dir.path().join("corrupt.json");
    std::fs::write(&corrupt, "{\"format\":").unwrap();
    assert_one_line_error(&aerotwin(&["analyze", "--record", s(&corrupt)]), "record_corrupt");

    assert_one_line_error(&aerotwin(&["replay", "--script"]), "usage");
}

#[test]
fn window_outside_record_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vr.json");
    let o = aerotwin(&["replay", "--script", s(&repo("scripts/vr_grasp_release.toml")), "--out", s(&out)]);
    assert!(o.status.success());
    assert_one_line_error(
        &aerotwin(&["analyze", "--record", s(&out), "--from", "100", "--to", "200"]),
        "empty_window",
    );
}

#[test]
fn validate_accepts_shipped_files() {
    let o = aerotwin(&[
        "validate",
        "--config",
        s(&repo("configs/default.toml")),
        "--script",
        s(&repo("scripts/nine_waypoints.toml")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("9 waypoints"));
}

#[test]
fn serve_runs_for_a_duration_and_honours_port_env() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("served.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_aerotwin"))
        .args(["serve", "--duration", "0.2", "--record", s(&record)])
        .env("AEROTWIN_PORT", "0")
        .env("AEROTWIN_LOG", "error")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    assert!(first.starts_with("listening on 127.0.0.1:"), "{first}");
    assert!(!first.ends_with(":7450"));
    assert!(child.wait().unwrap().success());
    let rec = SessionRecord::load(&record).unwrap();
    assert_eq!(rec.frames.len(), 20);
}
