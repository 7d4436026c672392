use aerotwin_core::telemetry::record::SessionRecord;
use aerotwin_core::telemetry::stats::*;
use aerotwin_core::telemetry::{DroneSummary, TelemetryFrame};
use aerotwin_core::{Config, SceneSetup};
use proptest::prelude::*;

fn record(samples: &[(f64, f64)]) -> SessionRecord {
    let mut r = SessionRecord::new(Config::default(), SceneSetup::default());
    for (k, &(t, pitch_deg)) in samples.iter().enumerate() {
        r.push_frame(TelemetryFrame {
            t,
            tick: k as u64 + 1,
            drone: DroneSummary {
                pitch: pitch_deg.to_radians(),
                roll: -0.5 * pitch_deg.to_radians(),
                ..Default::default()
            },
            ..Default::default()
        });
    }
    r
}

/// Textbook two-pass mean and population variance.
fn naive(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let max = xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (max, var.sqrt(), mean)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn sine_over_whole_periods() {
    // 5° sin(t), 100 samples per period, 10 periods.
    let h = std::f64::consts::TAU / 100.0;
    let samples: Vec<_> = (0..1000).map(|k| (k as f64 * h, 5.0 * (k as f64 * h).sin())).collect();
    let r = record(&samples);
    let s = compute_stats(&r, Signal::Pitch, (0.0, r.duration())).unwrap();
    assert_eq!(s.samples, 1000);
    assert!((s.max_abs - 5.0).abs() <= 1e-9, "{s:?}");
    assert!((s.std_dev - 5.0 / 2f64.sqrt()).abs() <= 1e-9, "{s:?}");
    assert!((s.std_dev - 3.536).abs() <= 0.001);
    assert!(s.mean.abs() < 1e-12);
    let roll = compute_stats(&r, Signal::Roll, (0.0, r.duration())).unwrap();
    assert!((roll.max_abs - 2.5).abs() <= 1e-9);
}

#[test]
fn window_selects_frames() {
    let samples: Vec<_> = (0..100).map(|k| (k as f64 * 0.01, if k < 50 { 1.0 } else { 3.0 })).collect();
    let r = record(&samples);
    let s = compute_stats(&r, Signal::Pitch, (0.5, 0.99)).unwrap();
    assert_eq!(s.samples, 50);
    assert!((s.mean - 3.0).abs() < 1e-12 && s.std_dev < 1e-12);
    assert!(matches!(
        compute_stats(&r, Signal::Pitch, (2.0, 3.0)),
        Err(StatsError::EmptyWindow { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn agrees_with_two_pass_reference(
        offset in -5.0f64..5.0,
        xs in prop::collection::vec(-20.0f64..20.0, 1..2000),
    ) {
        let samples: Vec<_> = xs.iter().enumerate().map(|(k, x)| (k as f64 * 0.01, x + offset)).collect();
        let r = record(&samples);
        let s = compute_stats(&r, Signal::Pitch, (0.0, r.duration())).unwrap();
        let degrees: Vec<f64> = r.frames.iter().map(|f| f.drone.pitch.to_degrees()).collect();
        let (max, std, mean) = naive(&degrees);
        prop_assert!(rel(s.max_abs, max) <= 1e-12);
        prop_assert!(rel(s.std_dev, std) <= 1e-12, "{} vs {}", s.std_dev, std);
        prop_assert!(rel(s.mean, mean) <= 1e-12 || (s.mean - mean).abs() <= 1e-12 * std);
        prop_assert!(s.max_abs >= s.std_dev);
    }
}
