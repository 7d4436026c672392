//! Wire protocol shared by the TCP server, the browser socket bridge and the
//! golden fixtures.
//!
//! One message is a 4-byte big-endian length followed by that many bytes of
//! UTF-8 JSON. Every message object carries `protocol_version` and a `type`
//! discriminator. Unknown fields are ignored on decode. Over the browser
//! socket the length prefix is dropped and each JSON object travels as one
//! text message. See `docs/protocol.md` for the schema.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GapMarker, TelemetryFrame};
use crate::kinematics::{JointAngles, JointLimits, LinkGeometry};
use crate::operator::{CommandKind, OperatorCommand, ScriptPhase};

pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on a single message body.
pub const MAX_MESSAGE_LEN: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("protocol version {got} is not supported (expected {PROTOCOL_VERSION})")]
    VersionMismatch { got: u32 },
    #[error("message of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("expected a {expected} message, got {got}")]
    Unexpected {
        expected: &'static str,
        got: &'static str,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Control,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CommandBody {
    /// Direct joint targets; clamped to the limits and subject to the stale
    /// input rule.
    Teleop { joint_targets: JointAngles },
    /// Cartesian increment of the commanded grip pose, m.
    Jog { dx: f64, dz: f64 },
    /// Joint targets from the script player.
    Script {
        joint_targets: JointAngles,
        waypoint: usize,
        phase: ScriptPhase,
    },
    /// Freeze the arm where it is.
    Hold,
}

/// Operator-to-twin command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireCommand {
    /// Sender's clock, s. Must increase per session.
    pub t: f64,
    #[serde(default)]
    pub seq: u64,
    /// New grip closure; absent keeps the current one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grip: Option<f64>,
    #[serde(flatten)]
    pub body: CommandBody,
}

impl WireCommand {
    pub fn from_operator(command: &OperatorCommand, seq: u64) -> Self {
        let body = match command.kind {
            CommandKind::Teleop { joint_targets } => CommandBody::Teleop { joint_targets },
            CommandKind::Jog { step, .. } => CommandBody::Jog {
                dx: step.dx,
                dz: step.dz,
            },
            CommandKind::Script {
                joint_targets,
                waypoint,
                phase,
            } => CommandBody::Script {
                joint_targets,
                waypoint,
                phase,
            },
        };
        Self {
            t: command.timestamp,
            seq,
            grip: Some(command.grip_fraction),
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<String>,
    },
    Welcome {
        role: Role,
        session: u64,
        geometry: LinkGeometry,
        limits: JointLimits,
        rate: u32,
        jog_step: f64,
    },
    Reject {
        reason: String,
    },
    Frame(TelemetryFrame),
    Gap(GapMarker),
    Command(WireCommand),
    Bye {
        reason: String,
    },
}

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Welcome { .. } => "welcome",
            Message::Reject { .. } => "reject",
            Message::Frame(_) => "frame",
            Message::Gap(_) => "gap",
            Message::Command(_) => "command",
            Message::Bye { .. } => "bye",
        }
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    protocol_version: u32,
    #[serde(flatten)]
    message: &'a Message,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    protocol_version: u32,
    #[serde(flatten)]
    message: Message,
}

/// JSON body of a message, without the length prefix.
pub fn to_json(message: &Message) -> String {
    serde_json::to_string(&EnvelopeOut {
        protocol_version: PROTOCOL_VERSION,
        message,
    })
    .expect("messages always serialize")
}

pub fn from_json(text: &[u8]) -> Result<Message, ProtocolError> {
    let env: EnvelopeIn =
        serde_json::from_slice(text).map_err(|e| ProtocolError::MalformedMessage(e.to_string()))?;
    if env.protocol_version != PROTOCOL_VERSION {
        return Err(ProtocolError::VersionMismatch {
            got: env.protocol_version,
        });
    }
    Ok(env.message)
}

pub fn encode(message: &Message) -> Vec<u8> {
    let body = to_json(message);
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body.as_bytes());
    out
}

/// Decodes exactly one length-prefixed message occupying all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Message, ProtocolError> {
    let Some((prefix, body)) = bytes.split_first_chunk::<4>() else {
        return Err(ProtocolError::MalformedMessage("missing length prefix".into()));
    };
    let len = u32::from_be_bytes(*prefix) as usize;
    if len != body.len() {
        return Err(ProtocolError::MalformedMessage(format!(
            "length prefix says {len} bytes, found {}",
            body.len()
        )));
    }
    from_json(body)
}

pub fn encode_frame(frame: &TelemetryFrame) -> Vec<u8> {
    encode(&Message::Frame(frame.clone()))
}

pub fn decode_frame(bytes: &[u8]) -> Result<TelemetryFrame, ProtocolError> {
    match decode(bytes)? {
        Message::Frame(f) => Ok(f),
        other => Err(ProtocolError::Unexpected {
            expected: "frame",
            got: other.type_name(),
        }),
    }
}

pub fn write_message<W: Write>(w: &mut W, message: &Message) -> Result<(), ProtocolError> {
    w.write_all(&encode(message))?;
    Ok(())
}

/// Reads one message; `Ok(None)` on a clean end of stream between messages.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Message>, ProtocolError> {
    let mut prefix = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut prefix[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => {
                return Err(ProtocolError::MalformedMessage(
                    "stream ended inside a length prefix".into(),
                ))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_MESSAGE_LEN {
        return Err(ProtocolError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    from_json(&body).map(Some)
}
