//! Command protocol: one JSON object per line.
//!
//! ```text
//! {"v":1,"id":7,"token":"secret","cmd":"set_emotion","emotion":"happy","transition_ms":500}
//! {"v":1,"id":7,"ok":true,"target":{...FaceState...}}
//! ```
//!
//! `v` is required and must equal [`PROTOCOL_VERSION`]. `id` is optional and
//! echoed back. `token` is checked when the server has one configured.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use hybrid_face::render::RenderMode;
use hybrid_face::{Emotion, FaceState};

use crate::session::SessionConfig;

pub const PROTOCOL_VERSION: u64 = 1;

/// Every `cmd` tag the service understands.
pub const COMMAND_TAGS: [&str; 9] = [
    "set_emotion",
    "set_affect",
    "set_weights",
    "set_pupil",
    "set_mode",
    "start_session",
    "choice",
    "abort_session",
    "ping",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetEmotion {
        emotion: Emotion,
        /// Defaults to the engine transition length.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transition_ms: Option<f64>,
        /// Reserved for light/sound cues; ignored.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cue: Option<String>,
    },
    SetAffect {
        alpha: f64,
        beta: f64,
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transition_ms: Option<f64>,
    },
    /// Categorical weights by emotion; missing emotions weigh zero.
    SetWeights {
        weights: BTreeMap<Emotion, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transition_ms: Option<f64>,
    },
    SetPupil {
        fraction: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transition_ms: Option<f64>,
    },
    SetMode {
        mode: RenderMode,
    },
    StartSession {
        config: SessionConfig,
    },
    /// Forced-choice answer. Kept as text so answers outside the eight
    /// emotions reach the session and get a re-prompt rather than a parse error.
    Choice {
        participant_id: String,
        chosen_emotion: String,
    },
    AbortSession,
    Ping,
}

impl Command {
    /// Whether the command can change face or session state.
    pub fn is_mutating(&self) -> bool {
        !matches!(self, Command::Ping)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: Option<Value>,
    pub token: Option<String>,
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnsupportedVersion,
    UnknownCommand,
    InvalidPayload,
    Unauthorized,
    SessionActive,
    NoSession,
    InvalidChoice,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{code:?}: {message}")]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
}

impl ProtocolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> ProtocolError {
        ProtocolError {
            code,
            message: message.into(),
        }
    }
}

/// Parse failure together with whatever `id` could be recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub id: Option<Value>,
    pub error: ProtocolError,
}

/// Parses one line. The token is checked only when `expected_token` is set.
pub fn parse_request(line: &str, expected_token: Option<&str>) -> Result<Request, Rejected> {
    let value: Value = serde_json::from_str(line).map_err(|e| Rejected {
        id: None,
        error: ProtocolError::new(ErrorCode::Malformed, e.to_string()),
    })?;
    parse_value(value, expected_token)
}

pub fn parse_value(value: Value, expected_token: Option<&str>) -> Result<Request, Rejected> {
    let Value::Object(mut obj) = value else {
        return Err(Rejected {
            id: None,
            error: ProtocolError::new(ErrorCode::Malformed, "message is not an object"),
        });
    };
    let id = obj.remove("id").filter(|v| !v.is_null());
    let fail = |code, message: String| Rejected {
        id: id.clone(),
        error: ProtocolError::new(code, message),
    };
    match obj.remove("v") {
        Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION) => {}
        Some(v) => return Err(fail(ErrorCode::UnsupportedVersion, format!("unsupported version {v}"))),
        None => return Err(fail(ErrorCode::Malformed, "missing version field v".into())),
    }
    let token = match obj.remove("token") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(fail(ErrorCode::Malformed, "token must be a string".into())),
    };
    if let Some(expected) = expected_token {
        if token.as_deref() != Some(expected) {
            return Err(fail(ErrorCode::Unauthorized, "missing or wrong token".into()));
        }
    }
    match obj.get("cmd") {
        Some(Value::String(tag)) if COMMAND_TAGS.contains(&tag.as_str()) => {}
        Some(Value::String(tag)) => return Err(fail(ErrorCode::UnknownCommand, format!("unknown command {tag:?}"))),
        _ => return Err(fail(ErrorCode::Malformed, "missing command tag cmd".into())),
    }
    // Unit variants ignore deny_unknown_fields, so check those by hand.
    if matches!(obj.get("cmd").and_then(Value::as_str), Some("ping" | "abort_session")) && obj.len() > 1 {
        return Err(fail(ErrorCode::InvalidPayload, "unexpected fields".into()));
    }
    let command =
        Command::deserialize(Value::Object(obj)).map_err(|e| fail(ErrorCode::InvalidPayload, e.to_string()))?;
    Ok(Request { id, token, command })
}

/// Serializes a command as a protocol line body (without `v`, `id`, `token`).
pub fn command_value(command: &Command) -> Value {
    serde_json::to_value(command).unwrap_or(Value::Null)
}

/// Builds a full request line.
pub fn request_line(id: Option<Value>, token: Option<&str>, command: &Command) -> String {
    let mut obj = Map::new();
    obj.insert("v".into(), Value::from(PROTOCOL_VERSION));
    if let Some(id) = id {
        obj.insert("id".into(), id);
    }
    if let Some(t) = token {
        obj.insert("token".into(), Value::from(t));
    }
    if let Value::Object(body) = command_value(command) {
        obj.extend(body);
    }
    Value::Object(obj).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAck {
    pub trials: usize,
    pub start_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    #[serde(rename = "type")]
    pub kind: String,
    pub v: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub ok: bool,
    /// Face target after the command was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<FaceState>,
    /// Service clock, ms; set on pings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionAck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Reply {
    pub fn ok(id: Option<Value>) -> Reply {
        Reply {
            kind: "reply".into(),
            v: PROTOCOL_VERSION,
            id,
            ok: true,
            target: None,
            t_ms: None,
            session: None,
            error: None,
        }
    }

    pub fn error(id: Option<Value>, error: ProtocolError) -> Reply {
        Reply {
            ok: false,
            error: Some(ErrorBody {
                code: error.code,
                message: error.message,
            }),
            ..Reply::ok(id)
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_set_emotion() {
        let r = parse_request(
            r#"{"v":1,"id":3,"cmd":"set_emotion","emotion":"happy","transition_ms":0}"#,
            None,
        )
        .unwrap();
        assert_eq!(r.id, Some(Value::from(3)));
        assert_eq!(
            r.command,
            Command::SetEmotion {
                emotion: Emotion::Happy,
                transition_ms: Some(0.0),
                cue: None
            }
        );
    }

    #[test]
    fn unknown_tag_and_fields() {
        let e = parse_request(r#"{"v":1,"id":"a","cmd":"dance"}"#, None).unwrap_err();
        assert_eq!(e.error.code, ErrorCode::UnknownCommand);
        assert_eq!(e.id, Some(Value::from("a")));
        let e = parse_request(r#"{"v":1,"cmd":"ping","extra":1}"#, None).unwrap_err();
        assert_eq!(e.error.code, ErrorCode::InvalidPayload);
        let e = parse_request(r#"{"v":1,"cmd":"set_emotion","emotion":"bored"}"#, None).unwrap_err();
        assert_eq!(e.error.code, ErrorCode::InvalidPayload);
    }

    #[test]
    fn version_token_and_shape() {
        assert_eq!(
            parse_request(r#"{"cmd":"ping"}"#, None).unwrap_err().error.code,
            ErrorCode::Malformed
        );
        assert_eq!(
            parse_request(r#"{"v":2,"cmd":"ping"}"#, None).unwrap_err().error.code,
            ErrorCode::UnsupportedVersion
        );
        assert_eq!(parse_request("[1]", None).unwrap_err().error.code, ErrorCode::Malformed);
        assert_eq!(parse_request("{", None).unwrap_err().error.code, ErrorCode::Malformed);
        let line = r#"{"v":1,"cmd":"ping","token":"k"}"#;
        assert!(parse_request(line, Some("k")).is_ok());
        assert_eq!(
            parse_request(line, Some("j")).unwrap_err().error.code,
            ErrorCode::Unauthorized
        );
        assert_eq!(
            parse_request(r#"{"v":1,"cmd":"ping"}"#, Some("k"))
                .unwrap_err()
                .error
                .code,
            ErrorCode::Unauthorized
        );
    }

    #[test]
    fn request_line_round_trip() {
        let cmds = [
            Command::SetAffect {
                alpha: 0.5,
                beta: -0.25,
                gamma: 0.0,
                transition_ms: None,
            },
            Command::SetWeights {
                weights: [(Emotion::Sad, 0.5)].into(),
                transition_ms: Some(100.0),
            },
            Command::SetPupil {
                fraction: 0.4,
                transition_ms: None,
            },
            Command::SetMode {
                mode: RenderMode::EyesOnly,
            },
            Command::Choice {
                participant_id: "p1".into(),
                chosen_emotion: "sad".into(),
            },
            Command::AbortSession,
            Command::Ping,
        ];
        for c in cmds {
            let line = request_line(Some(Value::from(1)), Some("t"), &c);
            let r = parse_request(&line, Some("t")).unwrap();
            assert_eq!(r.command, c);
        }
    }

    #[test]
    fn reply_omits_empty_fields() {
        let line = Reply::ok(None).to_line();
        assert_eq!(line, r#"{"type":"reply","v":1,"ok":true}"#);
        let line = Reply::error(Some(Value::from(2)), ProtocolError::new(ErrorCode::InvalidPayload, "x")).to_line();
        assert!(line.contains(r#""code":"invalid_payload""#));
    }
}
