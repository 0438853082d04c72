//! Session export. All files of one export land together or not at all.
//!
//! | file | contents |
//! |---|---|
//! | `session.json` | manifest: format version, config, counts, abort flag |
//! | `schedule.csv` | `sequence,label,condition,repeat,pre_ms` |
//! | `onset_log.csv` | `sequence,monotonic_ms,session_ms,wall_clock,label,condition` |
//! | `events.csv` | ERP event list, seconds from session start |
//! | `choices.csv` | `sequence,participant_id,shown,chosen,condition,response_ms` |
//! | `confusion_counts.csv` | shown × chosen counts plus row total |
//! | `confusion_percent.csv` | row-normalized percentages, 6 decimals |
//! | `replay.jsonl` | command/frame log, when one is given |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use erp_lab::{Event, EventList};

use crate::error::{Result, ServiceError};
use crate::service::ReplayLog;
use crate::session::{SessionConfig, SessionRecord};

pub const SESSION_FORMAT: &str = "hybridface-session";
pub const SESSION_FORMAT_VERSION: u32 = 1;

pub fn schedule_csv(record: &SessionRecord) -> String {
    let mut out = String::from("sequence,label,condition,repeat,pre_ms\n");
    for t in &record.schedule {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            t.sequence,
            t.emotion,
            t.condition.name(),
            t.repeat,
            t.pre_ms
        );
    }
    out
}

pub fn onset_log_csv(record: &SessionRecord) -> String {
    let mut out = String::from("sequence,monotonic_ms,session_ms,wall_clock,label,condition\n");
    for o in &record.onsets {
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{},{},{}",
            o.sequence,
            o.monotonic_ms,
            o.session_ms,
            o.wall_clock,
            o.label,
            o.condition.name()
        );
    }
    out
}

/// Onsets as an ERP event list; times are seconds from session start.
pub fn event_list(record: &SessionRecord) -> Result<EventList> {
    let events = record
        .onsets
        .iter()
        .map(|o| Event {
            time: o.session_ms / 1000.0,
            label: o.label.to_string(),
            condition: o.condition.name().to_string(),
        })
        .collect();
    Ok(EventList::new(events)?)
}

pub fn choices_csv(record: &SessionRecord) -> String {
    let mut out = String::from("sequence,participant_id,shown,chosen,condition,response_ms\n");
    for c in &record.choices {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3}",
            c.sequence,
            c.participant_id,
            c.shown,
            c.chosen,
            c.condition.name(),
            c.response_ms
        );
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    aborted: bool,
    trials_scheduled: usize,
    trials_presented: usize,
    choices: usize,
    start_ms: f64,
    end_ms: Option<f64>,
    wall_start: &'a str,
    files: Vec<&'a str>,
    config: &'a SessionConfig,
}

/// Writes every session file into `dir`. On any failure the files written
/// so far are removed again.
pub fn export_session(record: &SessionRecord, log: Option<&ReplayLog>, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(&str, String)> = vec![
        ("schedule.csv", schedule_csv(record)),
        ("onset_log.csv", onset_log_csv(record)),
        ("events.csv", event_list(record)?.to_csv()),
        ("choices.csv", choices_csv(record)),
        ("confusion_counts.csv", record.confusion.counts_csv()),
        ("confusion_percent.csv", record.confusion.percent_csv()),
    ];
    if let Some(log) = log {
        files.push(("replay.jsonl", log.to_jsonl()));
    }
    let mut names: Vec<&str> = files.iter().map(|(n, _)| *n).collect();
    names.push("session.json");
    let manifest = Manifest {
        format: SESSION_FORMAT,
        version: SESSION_FORMAT_VERSION,
        aborted: record.aborted,
        trials_scheduled: record.schedule.len(),
        trials_presented: record.onsets.len(),
        choices: record.choices.len(),
        start_ms: record.start_ms,
        end_ms: record.end_ms,
        wall_start: &record.wall_start,
        files: names,
        config: &record.config,
    };
    let manifest = serde_json::to_string_pretty(&manifest)? + "\n";
    files.push(("session.json", manifest));
    write_all_or_nothing(dir.as_ref(), &files)
}

fn export_err(path: &Path, source: std::io::Error) -> ServiceError {
    ServiceError::Export {
        path: path.display().to_string(),
        source,
    }
}

fn write_all_or_nothing(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    let created = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| export_err(dir, e))?;
    let cleanup = |paths: &[PathBuf]| {
        for p in paths {
            let _ = fs::remove_file(p);
        }
        if created {
            let _ = fs::remove_dir(dir);
        }
    };
    let mut temps = Vec::with_capacity(files.len());
    for (name, content) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, content) {
            temps.push(tmp.clone());
            cleanup(&temps);
            return Err(export_err(&tmp, e));
        }
        temps.push(tmp);
    }
    let mut done = Vec::with_capacity(files.len());
    for (tmp, (name, _)) in temps.iter().zip(files) {
        let target = dir.join(name);
        if let Err(e) = fs::rename(tmp, &target) {
            cleanup(&done);
            cleanup(&temps);
            return Err(export_err(&target, e));
        }
        done.push(target);
    }
    Ok(done)
}
