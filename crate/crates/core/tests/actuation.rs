use aerotwin_core::actuation::*;
use aerotwin_core::kinematics::JointAngles;

/// Checks a kind sequence against (contact (grasp (release|drop))?)*.
fn matches_grammar(kinds: &[ContactKind]) -> bool {
    // 0 expect contact, 1 after contact, 2 after grasp
    let mut state = 0;
    for k in kinds {
        state = match (state, k) {
            (0 | 1, ContactKind::Contact) => 1,
            (2, ContactKind::Contact) => return false,
            (1, ContactKind::Grasp) => 2,
            (2, ContactKind::Release | ContactKind::Drop) => 0,
            _ => return false,
        };
    }
    true
}

#[test]
fn grammar_checker_itself() {
    use ContactKind::*;
    assert!(matches_grammar(&[Contact, Contact, Grasp, Release, Contact]));
    assert!(!matches_grammar(&[Grasp]));
    assert!(!matches_grammar(&[Contact, Release]));
    assert!(!matches_grammar(&[Contact, Grasp, Contact]));
}

#[test]
fn every_short_force_trajectory_obeys_the_grammar() {
    let forces = [0.0, 0.03, 0.05, 0.3];
    let mut alphabet = Vec::new();
    for &l in &forces {
        for &r in &forces {
            for fraction in [0.2, 0.8] {
                for within in [false, true] {
                    alphabet.push((l, r, fraction, within));
                }
            }
        }
    }
    let n = alphabet.len();
    let len = 3;
    let mut seen = std::collections::HashSet::new();
    for code in 0..n.pow(len) {
        let mut det = ContactDetector::new(0.05, 0.3);
        let mut kinds = Vec::new();
        let mut c = code;
        for step in 0..len {
            let (l, r, fraction, within) = alphabet[c % n];
            c /= n;
            let g = GripperState {
                fraction,
                bar_force_left: l,
                bar_force_right: r,
            };
            let ev = det.detect_contact(step as f64 * 0.01, &g, within);
            for e in &ev {
                assert_eq!(e.timestamp, step as f64 * 0.01);
            }
            kinds.extend(ev.iter().map(|e| e.kind));
        }
        // Continue with an open, empty gripper until the detector is free.
        let open = GripperState::default();
        kinds.extend(det.detect_contact(1.0, &open, false).iter().map(|e| e.kind));
        assert_eq!(det.phase(), ContactPhase::Free);
        assert!(matches_grammar(&kinds), "{code}: {kinds:?}");
        seen.insert(kinds);
    }
    use ContactKind::*;
    for expected in [
        vec![Contact],
        vec![Contact, Grasp, Release],
        vec![Contact, Grasp, Drop],
        vec![Contact, Contact, Grasp, Drop],
    ] {
        assert!(seen.contains(&expected), "{expected:?} never produced");
    }
}

#[test]
fn rising_forces_on_both_bars() {
    let mut det = ContactDetector::new(0.05, 0.3);
    let mut kinds = Vec::new();
    for i in 0..=30 {
        let f = i as f64 * 0.01;
        let g = GripperState {
            fraction: 0.8,
            bar_force_left: f,
            bar_force_right: f,
        };
        kinds.extend(det.detect_contact(i as f64 * 0.01, &g, true).iter().map(|e| e.kind));
    }
    assert_eq!(kinds, [ContactKind::Contact, ContactKind::Grasp]);
}

#[test]
fn servo_staircase_matches_rate_arithmetic() {
    // Targets change every 50 ticks; the position must follow a ramp of
    // exactly max_rate * dt per tick and land on each target.
    let dt = 0.01;
    let mut bank = ServoBank::new(&JointAngles::ZERO, 3.0, 2.0);
    let steps = [0.3, 1.0, -0.5, -0.5, 0.25];
    let mut expected = 0.0f64;
    for &target in &steps {
        let q = JointAngles::new(target, 0.0, 0.0);
        for _ in 0..50 {
            step_servos(&mut bank, &q, 0.0, dt);
            let d = target - expected;
            expected = if d.abs() <= 3.0 * dt { target } else { expected + (3.0 * dt).copysign(d) };
            assert!((bank.positions().theta - expected).abs() < 1e-12);
        }
    }
    assert_eq!(bank.positions().theta, 0.25);
    assert!(bank.at_rest());
}

#[test]
fn gripper_closes_at_its_own_rate() {
    let mut bank = ServoBank::new(&JointAngles::ZERO, 3.0, 2.0);
    for _ in 0..25 {
        step_servos(&mut bank, &JointAngles::ZERO, 1.0, 0.01);
    }
    assert!((bank.grip_fraction() - 0.5).abs() < 1e-12);
    for _ in 0..25 {
        step_servos(&mut bank, &JointAngles::ZERO, 1.0, 0.01);
    }
    assert_eq!(bank.grip_fraction(), 1.0);
}

#[test]
fn bar_force_model() {
    assert_eq!(grip_force_model(0.4, 0.5, 1.0), (0.0, 0.0));
    let (l, r) = grip_force_model(0.8, 0.5, 1.0);
    assert!((l - 0.3).abs() < 1e-12 && l == r);
    assert_eq!(grip_force_model(1.0, 1.0, 5.0), (1.0, 1.0));
}
