use aerotwin_core::actuation::{ContactEvent, ContactKind};
use aerotwin_core::kinematics::{JointAngles, JointLimits, JointTorques, LinkGeometry, PlanarPose};
use aerotwin_core::operator::ScriptPhase;
use aerotwin_core::telemetry::protocol::*;
use aerotwin_core::telemetry::*;
use proptest::prelude::*;

const ZERO: &[u8] = include_bytes!("fixtures/frame_zero.bin");
const GRASP: &[u8] = include_bytes!("fixtures/frame_grasp.bin");

fn grasp_frame() -> TelemetryFrame {
    TelemetryFrame {
        t: 0.37,
        tick: 37,
        drone: DroneSummary {
            x: 0.001,
            y: -0.0025,
            z: 1.5,
            roll: 0.0125,
            pitch: -0.0625,
            yaw: 0.0,
        },
        joints: JointAngles {
            theta: 0.5,
            beta: 1.25,
            alpha: 0.75,
            wrist_roll: -0.1,
        },
        grip_fraction: 0.55,
        grip_pose: PlanarPose {
            x: 0.55,
            z: -0.05,
            phi: 0.0,
        },
        torques: JointTorques {
            t1: 3.25,
            t2: 1.5,
            t3: 0.625,
        },
        forces: BarForces {
            left: 0.06,
            right: 0.06,
        },
        events: vec![
            FrameEvent::Contact(ContactEvent {
                timestamp: 0.37,
                kind: ContactKind::Contact,
                force: 0.06,
            }),
            FrameEvent::Contact(ContactEvent {
                timestamp: 0.37,
                kind: ContactKind::Grasp,
                force: 0.06,
            }),
            FrameEvent::Haptic(HapticEvent {
                timestamp: 0.37,
                intensity: 0.06,
            }),
        ],
    }
}

#[test]
fn golden_zero_frame() {
    assert_eq!(decode_frame(ZERO).unwrap(), TelemetryFrame::default());
    assert_eq!(encode_frame(&TelemetryFrame::default()), ZERO);
}

#[test]
fn golden_frame_with_three_events() {
    let f = decode_frame(GRASP).unwrap();
    assert_eq!(f, grasp_frame());
    let kinds: Vec<_> = f.events.iter().map(|e| e.contact_kind()).collect();
    assert_eq!(
        kinds,
        [Some(ContactKind::Contact), Some(ContactKind::Grasp), None]
    );
    assert_eq!(encode_frame(&f), GRASP);
}

#[test]
fn golden_prefix_is_big_endian_length() {
    let len = u32::from_be_bytes(GRASP[..4].try_into().unwrap()) as usize;
    assert_eq!(len, GRASP.len() - 4);
    assert_eq!(GRASP[4], b'{');
}

#[test]
fn newer_peers_may_add_fields() {
    let text = r#"{"protocol_version":1,"type":"frame","t":0.0,"tick":0,"session_note":"x",
        "drone":{"x":0.0,"y":0.0,"z":0.0,"roll":0.0,"pitch":0.0,"yaw":0.0,"battery":0.9},
        "joints":{"theta":0.0,"beta":0.0,"alpha":0.0,"wrist_roll":0.0},"grip_fraction":0.0,
        "grip_pose":{"x":0.0,"z":0.0,"phi":0.0},"torques":{"t1":0.0,"t2":0.0,"t3":0.0},
        "forces":{"left":0.0,"right":0.0}}"#;
    assert_eq!(from_json(text.as_bytes()).unwrap(), Message::Frame(TelemetryFrame::default()));
}

#[test]
fn handshake_messages_round_trip() {
    let msgs = [
        Message::Hello {
            role: Role::Control,
            client: Some("cockpit".into()),
        },
        Message::Welcome {
            role: Role::Observer,
            session: 7,
            geometry: LinkGeometry::default(),
            limits: JointLimits::default(),
            rate: 100,
            jog_step: 0.02,
        },
        Message::Reject {
            reason: "control session already taken".into(),
        },
        Message::Gap(GapMarker {
            dropped: 4,
            last_dropped_t: 1.23,
        }),
        Message::Command(WireCommand {
            t: 2.0,
            seq: 9,
            grip: Some(1.0),
            body: CommandBody::Script {
                joint_targets: JointAngles::new(0.1, 0.2, 0.3),
                waypoint: 3,
                phase: ScriptPhase::Dwell,
            },
        }),
    ];
    for m in msgs {
        assert_eq!(decode(&encode(&m)).unwrap(), m);
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -10.0f64..10.0,
    ]
}

fn event() -> impl Strategy<Value = FrameEvent> {
    let kind = prop_oneof![
        Just(ContactKind::Contact),
        Just(ContactKind::Grasp),
        Just(ContactKind::Release),
        Just(ContactKind::Drop),
    ];
    prop_oneof![
        (finite(), kind, finite()).prop_map(|(timestamp, kind, force)| {
            FrameEvent::Contact(ContactEvent { timestamp, kind, force })
        }),
        (finite(), finite())
            .prop_map(|(timestamp, intensity)| FrameEvent::Haptic(HapticEvent { timestamp, intensity })),
    ]
}

fn frame() -> impl Strategy<Value = TelemetryFrame> {
    (
        (finite(), any::<u64>(), prop::array::uniform6(finite())),
        prop::array::uniform4(finite()),
        (finite(), prop::array::uniform3(finite()), prop::array::uniform3(finite())),
        (finite(), finite()),
        prop::collection::vec(event(), 0..5),
    )
        .prop_map(|((t, tick, d), j, (grip, pose, tq), (l, r), events)| TelemetryFrame {
            t,
            tick,
            drone: DroneSummary {
                x: d[0],
                y: d[1],
                z: d[2],
                roll: d[3],
                pitch: d[4],
                yaw: d[5],
            },
            joints: JointAngles::from_array(j),
            grip_fraction: grip,
            grip_pose: PlanarPose::new(pose[0], pose[1], pose[2]),
            torques: JointTorques {
                t1: tq[0],
                t2: tq[1],
                t3: tq[2],
            },
            forces: BarForces { left: l, right: r },
            events,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn random_frames_round_trip_bit_exact(f in frame()) {
        let back = decode_frame(&encode_frame(&f)).unwrap();
        prop_assert_eq!(&back, &f);
        // Equality above treats 0.0 and -0.0 alike; the bits must survive too.
        prop_assert_eq!(back.t.to_bits(), f.t.to_bits());
        prop_assert_eq!(back.drone.pitch.to_bits(), f.drone.pitch.to_bits());
    }
}
