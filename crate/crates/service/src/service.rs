//! Deterministic service core: engine, session runner and replay log on one
//! logical clock.
//!
//! At equal timestamps, session phase changes run first, then external
//! commands, then the frame.

use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use hybrid_face::render::RenderMode;
use hybrid_face::{BasisSet, Emotion};

use crate::engine::{Engine, EngineConfig, Frame};
use crate::error::{Result, ServiceError};
use crate::protocol::{
    command_value, parse_request, parse_value, Command, ErrorCode, ProtocolError, Reply, Request, SessionAck,
};
use crate::session::{Directive, SessionRecord, SessionRunner};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceConfig {
    pub engine: EngineConfig,
    /// Render frames; when off only commands and sessions advance.
    pub render: bool,
    pub token: Option<String>,
}

/// Out-of-band messages for UI clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Notice {
    Prompt { sequence: usize, t_ms: f64 },
    SessionFinished { aborted: bool, presented: usize, t_ms: f64 },
}

impl Notice {
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap_or(Value::Null);
        if let Value::Object(o) = &mut v {
            o.insert("type".into(), Value::from("session"));
        }
        v.to_string()
    }
}

pub const REPLAY_FORMAT: &str = "hybridface-replay";
pub const REPLAY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub engine: EngineConfig,
    pub render: bool,
    /// Basis set as a TOML document.
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Header(LogHeader),
    /// Accepted request body (token removed) and its service time.
    Command {
        t_ms: f64,
        request: Value,
    },
    Frame {
        index: u64,
        t_ms: f64,
        sha256: String,
    },
    /// Service clock when the log was closed.
    Clock {
        t_ms: f64,
    },
}

/// Command and frame log; one JSON object per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayLog {
    pub entries: Vec<LogEntry>,
}

impl ReplayLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<ReplayLog> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: LogEntry = serde_json::from_str(line).map_err(|e| ServiceError::ReplayLog {
                line: i + 1,
                message: e.to_string(),
            })?;
            if entries.is_empty() != matches!(e, LogEntry::Header(_)) {
                return Err(ServiceError::ReplayLog {
                    line: i + 1,
                    message: "the header must be the first and only header line".into(),
                });
            }
            entries.push(e);
        }
        if entries.is_empty() {
            return Err(ServiceError::ReplayLog {
                line: 0,
                message: "empty log".into(),
            });
        }
        Ok(ReplayLog { entries })
    }

    pub fn header(&self) -> Option<&LogHeader> {
        match self.entries.first() {
            Some(LogEntry::Header(h)) => Some(h),
            _ => None,
        }
    }

    pub fn frame_digests(&self) -> impl Iterator<Item = (u64, f64, &str)> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Frame { index, t_ms, sha256 } => Some((*index, *t_ms, sha256.as_str())),
            _ => None,
        })
    }
}

#[derive(Debug)]
pub struct Service {
    engine: Engine,
    config: ServiceConfig,
    session: Option<SessionRunner>,
    /// Mode in force before the running session switched it.
    mode_before_session: RenderMode,
    finished: Vec<SessionRecord>,
    frames: Vec<Frame>,
    notices: Vec<Notice>,
    log: ReplayLog,
    clock_ms: f64,
}

fn internal(e: impl ToString) -> ProtocolError {
    ProtocolError::new(ErrorCode::Internal, e.to_string())
}

impl Service {
    pub fn new(basis: BasisSet, config: ServiceConfig) -> Result<Service> {
        let header = LogHeader {
            format: REPLAY_FORMAT.into(),
            version: REPLAY_VERSION,
            engine: config.engine,
            render: config.render,
            basis: basis.to_toml(),
        };
        let engine = Engine::new(basis, config.engine)?;
        Ok(Service {
            mode_before_session: engine.mode(),
            engine,
            config,
            session: None,
            finished: Vec::new(),
            frames: Vec::new(),
            notices: Vec::new(),
            log: ReplayLog {
                entries: vec![LogEntry::Header(header)],
            },
            clock_ms: 0.0,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn session(&self) -> Option<&SessionRunner> {
        self.session.as_ref()
    }

    pub fn clock_ms(&self) -> f64 {
        self.clock_ms
    }

    pub fn log(&self) -> &ReplayLog {
        &self.log
    }

    /// Records the current clock so a replay runs exactly as far.
    pub fn mark_clock(&mut self) {
        self.log.entries.push(LogEntry::Clock { t_ms: self.clock_ms });
    }

    pub fn drain_frames(&mut self) -> Vec<Frame> {
        std::mem::take(&mut self.frames)
    }

    pub fn drain_notices(&mut self) -> Vec<Notice> {
        std::mem::take(&mut self.notices)
    }

    /// Sessions that finished or were aborted since the last call.
    pub fn take_finished(&mut self) -> Vec<SessionRecord> {
        std::mem::take(&mut self.finished)
    }

    pub fn next_session_event(&self) -> Option<f64> {
        self.session.as_ref().and_then(|s| s.next_event_ms())
    }

    fn step(&mut self, t_ms: f64, frames_inclusive: bool) -> Result<()> {
        loop {
            let next_session = self.next_session_event();
            let next_frame = self.engine.next_frame_time();
            let frame_due = self.config.render
                && if frames_inclusive {
                    next_frame <= t_ms
                } else {
                    next_frame < t_ms
                };
            match next_session {
                Some(s) if s <= t_ms && (!frame_due || s <= next_frame) => self.session_event(s),
                _ if frame_due => self.emit_frame()?,
                _ => break,
            }
        }
        self.clock_ms = self.clock_ms.max(t_ms);
        Ok(())
    }

    /// Runs session phase changes up to and including `t_ms` and renders
    /// frames strictly before it.
    pub fn advance_to(&mut self, t_ms: f64) -> Result<()> {
        self.step(t_ms, false)
    }

    /// Like [`Self::advance_to`] but also renders a frame due exactly at `t_ms`.
    pub fn render_through(&mut self, t_ms: f64) -> Result<()> {
        self.step(t_ms, true)
    }

    /// Renders the next frame, running anything due before it.
    pub fn tick(&mut self) -> Result<Option<Frame>> {
        let t = self.engine.next_frame_time();
        let before = self.frames.len();
        self.render_through(t)?;
        Ok(self.frames.get(before).cloned())
    }

    fn emit_frame(&mut self) -> Result<()> {
        let frame = self.engine.render_next()?;
        self.log.entries.push(LogEntry::Frame {
            index: frame.index,
            t_ms: frame.t_ms,
            sha256: frame.digest(),
        });
        self.frames.push(frame);
        Ok(())
    }

    fn session_event(&mut self, t: f64) {
        if let Some(s) = self.session.as_mut() {
            let directives = s.advance(t);
            self.apply_directives(t, directives);
        }
    }

    fn apply_directives(&mut self, t: f64, directives: Vec<Directive>) {
        for d in directives {
            match d {
                Directive::Neutral { presentation } => {
                    self.engine.set_presentation(Some(presentation));
                    self.engine.show(t, Emotion::Neutral, 0.0);
                }
                Directive::Show {
                    emotion,
                    transition_ms,
                    presentation,
                } => {
                    self.engine.set_presentation(Some(presentation));
                    self.engine.show(t, emotion, transition_ms);
                }
                Directive::Prompt { sequence } => self.notices.push(Notice::Prompt { sequence, t_ms: t }),
                Directive::Finished { aborted } => {
                    self.engine.set_presentation(None);
                    self.engine.set_mode(self.mode_before_session);
                    if let Some(s) = self.session.take() {
                        let record = s.record();
                        self.notices.push(Notice::SessionFinished {
                            aborted,
                            presented: record.onsets.len(),
                            t_ms: t,
                        });
                        self.finished.push(record);
                    }
                }
            }
        }
    }

    /// Parses and handles one protocol line.
    pub fn handle_line(&mut self, t_ms: f64, line: &str) -> Reply {
        match parse_request(line, self.config.token.as_deref()) {
            Ok(req) => self.handle_request(t_ms, req),
            Err(r) => Reply::error(r.id, r.error),
        }
    }

    pub fn handle_value(&mut self, t_ms: f64, value: Value) -> Reply {
        match parse_value(value, None) {
            Ok(req) => self.handle_request(t_ms, req),
            Err(r) => Reply::error(r.id, r.error),
        }
    }

    pub fn handle_command(&mut self, t_ms: f64, command: Command) -> Reply {
        self.handle_request(
            t_ms,
            Request {
                id: None,
                token: None,
                command,
            },
        )
    }

    /// Applies a parsed request at `t_ms` (clamped to the service clock).
    pub fn handle_request(&mut self, t_ms: f64, req: Request) -> Reply {
        let t = t_ms.max(self.clock_ms);
        if let Err(e) = self.advance_to(t) {
            return Reply::error(req.id, internal(e));
        }
        let mut body = match command_value(&req.command) {
            Value::Object(o) => o,
            _ => Map::new(),
        };
        if let Some(id) = &req.id {
            body.insert("id".into(), id.clone());
        }
        self.log.entries.push(LogEntry::Command {
            t_ms: t,
            request: Value::Object(body),
        });
        match self.dispatch(t, &req.command) {
            Ok(mut reply) => {
                reply.id = req.id;
                reply
            }
            Err(e) => Reply::error(req.id, e),
        }
    }

    fn dispatch(&mut self, t: f64, command: &Command) -> std::result::Result<Reply, ProtocolError> {
        // Every acknowledgement carries the logical time it took effect.
        let mut reply = Reply::ok(None);
        reply.t_ms = Some(t);
        match command {
            Command::Ping => {}
            Command::StartSession { config } => {
                if self.session.is_some() {
                    return Err(ProtocolError::new(
                        ErrorCode::SessionActive,
                        "a session is already running",
                    ));
                }
                let runner = SessionRunner::start(config.clone(), t, Utc::now())?;
                reply.session = Some(SessionAck {
                    trials: runner.schedule().len(),
                    start_ms: runner.start_ms(),
                });
                self.mode_before_session = self.engine.mode();
                self.engine.set_mode(runner.timing().mode);
                self.session = Some(runner);
            }
            Command::Choice {
                participant_id,
                chosen_emotion,
            } => {
                let s = self
                    .session
                    .as_mut()
                    .ok_or_else(|| ProtocolError::new(ErrorCode::NoSession, "no session is running"))?;
                let directives = match s.choice(t, participant_id, chosen_emotion) {
                    Ok(d) => d,
                    Err(e) => {
                        if e.code == ErrorCode::InvalidChoice {
                            if let Some((_, trial)) = s.awaiting_choice() {
                                self.notices.push(Notice::Prompt {
                                    sequence: trial.sequence,
                                    t_ms: t,
                                });
                            }
                        }
                        return Err(e);
                    }
                };
                self.apply_directives(t, directives);
            }
            Command::AbortSession => {
                let s = self
                    .session
                    .as_mut()
                    .ok_or_else(|| ProtocolError::new(ErrorCode::NoSession, "no session is running"))?;
                let directives = s.abort(t);
                self.apply_directives(t, directives);
            }
            face => {
                if self.session.is_some() {
                    return Err(ProtocolError::new(
                        ErrorCode::SessionActive,
                        "face commands are locked while a session runs",
                    ));
                }
                reply.target = Some(self.engine.apply(t, face)?);
            }
        }
        Ok(reply)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub commands: usize,
    pub frames_expected: usize,
    pub frames_replayed: usize,
    /// First frame whose digest differs: (index, expected, actual).
    pub first_mismatch: Option<(u64, String, String)>,
    pub sessions: Vec<SessionRecord>,
    pub frames: Vec<Frame>,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.first_mismatch.is_none() && self.frames_expected == self.frames_replayed
    }
}

/// Re-runs a log and compares every frame digest.
pub fn replay(log: &ReplayLog) -> Result<ReplayReport> {
    let header = log.header().ok_or(ServiceError::ReplayLog {
        line: 1,
        message: "missing header".into(),
    })?;
    if header.format != REPLAY_FORMAT || header.version != REPLAY_VERSION {
        return Err(ServiceError::ReplayLog {
            line: 1,
            message: format!("unsupported log {} v{}", header.format, header.version),
        });
    }
    let basis = hybrid_face::load_basis(&header.basis, false)?;
    let mut svc = Service::new(
        basis,
        ServiceConfig {
            engine: header.engine,
            render: header.render,
            token: None,
        },
    )?;
    let mut commands = 0;
    let mut frames = Vec::new();
    for e in &log.entries {
        match e {
            LogEntry::Command { t_ms, request } => {
                let mut req = request.clone();
                if let Value::Object(o) = &mut req {
                    o.insert("v".into(), Value::from(crate::protocol::PROTOCOL_VERSION));
                }
                svc.handle_value(*t_ms, req);
                commands += 1;
            }
            LogEntry::Clock { t_ms } => svc.advance_to(*t_ms)?,
            LogEntry::Header(_) | LogEntry::Frame { .. } => {}
        }
        frames.extend(svc.drain_frames());
    }
    let expected: Vec<(u64, f64, &str)> = log.frame_digests().collect();
    if let Some(&(_, last_t, _)) = expected.last() {
        svc.render_through(last_t)?;
        frames.extend(svc.drain_frames());
    }
    let mut first_mismatch = None;
    for (i, &(index, _, digest)) in expected.iter().enumerate() {
        let actual = frames.get(i).map(|f| f.digest()).unwrap_or_default();
        if actual != digest || frames.get(i).map(|f| f.index) != Some(index) {
            first_mismatch = Some((index, digest.to_string(), actual));
            break;
        }
    }
    Ok(ReplayReport {
        commands,
        frames_expected: expected.len(),
        frames_replayed: frames.len(),
        first_mismatch,
        sessions: svc.take_finished(),
        frames,
    })
}
