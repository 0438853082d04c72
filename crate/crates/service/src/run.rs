//! Offline sessions driven by a scripted responder on the logical clock.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use hybrid_face::BasisSet;

use crate::engine::EngineConfig;
use crate::error::{Result, ServiceError};
use crate::protocol::Command;
use crate::service::{ReplayLog, Service, ServiceConfig};
use crate::session::{ResponderConfig, ScriptedResponder, SessionConfig, SessionRecord};

/// `session run` configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub session: SessionConfig,
    pub responder: ResponderConfig,
    pub engine: EngineConfig,
    /// Render and hash every frame into the replay log.
    pub render: bool,
    /// Basis file, relative to the config file; the built-in set when unset.
    pub basis: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: SessionRecord,
    pub log: ReplayLog,
}

/// Runs one session to completion with the configured responder.
pub fn run_scripted(basis: BasisSet, config: &RunConfig) -> Result<RunOutcome> {
    let mut svc = Service::new(
        basis,
        ServiceConfig {
            engine: config.engine,
            render: config.render,
            token: None,
        },
    )?;
    let mut responder = ScriptedResponder::new(&config.responder).map_err(|e| ServiceError::Config(e.message))?;
    let latency = config.responder.latency_ms;
    if !(latency >= 0.0 && latency.is_finite()) {
        return Err(ServiceError::Config(format!(
            "responder latency_ms {latency} must be >= 0"
        )));
    }
    let reply = svc.handle_command(
        0.0,
        Command::StartSession {
            config: config.session.clone(),
        },
    );
    if let Some(e) = reply.error {
        return Err(ServiceError::Config(e.message));
    }
    loop {
        if let Some(record) = svc.take_finished().pop() {
            let end = record.end_ms.unwrap_or(svc.clock_ms());
            svc.render_through(end)?;
            svc.mark_clock();
            return Ok(RunOutcome {
                record,
                log: svc.log().clone(),
            });
        }
        let pending = svc
            .session()
            .and_then(|s| s.awaiting_choice())
            .map(|(t, trial)| (t, trial.emotion));
        match (pending, svc.next_session_event()) {
            (Some((prompt_ms, shown)), _) => {
                let chosen = responder.respond(shown);
                let reply = svc.handle_command(
                    prompt_ms + latency,
                    Command::Choice {
                        participant_id: config.responder.participant_id.clone(),
                        chosen_emotion: chosen.name().to_string(),
                    },
                );
                if let Some(e) = reply.error {
                    return Err(ServiceError::Config(e.message));
                }
            }
            (None, Some(t)) => svc.advance_to(t)?,
            (None, None) => return Err(ServiceError::Config("session stalled".into())),
        }
        svc.drain_frames();
        svc.drain_notices();
    }
}
