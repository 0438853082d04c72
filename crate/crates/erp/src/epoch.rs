//! Epoch extraction, artifact rejection and baseline correction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ErpError, Result};
use crate::exec::Execution;
use crate::recording::{EventList, Recording};

/// Sample layout of an epoch around its onset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochWindow {
    /// Samples before the onset; the onset sits at this index.
    pub pre: usize,
    /// Samples after the onset.
    pub post: usize,
}

impl EpochWindow {
    /// `pre_ms` before and `post_ms` after the onset, endpoints inclusive.
    pub fn from_ms(pre_ms: f64, post_ms: f64, sample_rate: f64) -> Result<EpochWindow> {
        if !(pre_ms >= 0.0 && post_ms > 0.0 && pre_ms.is_finite() && post_ms.is_finite()) {
            return Err(ErpError::InvalidSpec(format!("epoch window -{pre_ms}..{post_ms} ms")));
        }
        let pre = (pre_ms / 1000.0 * sample_rate).round() as usize;
        let total = ((pre_ms + post_ms) / 1000.0 * sample_rate).round() as usize;
        if total <= pre {
            return Err(ErpError::InvalidSpec("epoch window shorter than one sample".into()));
        }
        Ok(EpochWindow { pre, post: total - pre })
    }

    pub fn len(&self) -> usize {
        self.pre + self.post + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of sample `i` relative to the onset, ms.
    pub fn time_ms(&self, i: usize, sample_rate: f64) -> f64 {
        (i as f64 - self.pre as f64) / sample_rate * 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    Amplitude { channel: String, value: f64 },
    Excluded,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::Amplitude { channel, value } => write!(f, "amplitude {value:.3} uV on {channel}"),
            RejectReason::Excluded => f.write_str("excluded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// Index of the originating event in its event list.
    pub event_index: usize,
    pub onset_time: f64,
    pub label: String,
    pub condition: String,
    pub subject: String,
    /// `channels × window.len()`.
    pub data: Vec<Vec<f64>>,
    pub rejected: Option<RejectReason>,
}

impl Epoch {
    pub fn is_kept(&self) -> bool {
        self.rejected.is_none()
    }
}

/// An event that produced no epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub event_index: usize,
    pub time: f64,
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub sample_rate: f64,
    pub channels: Vec<String>,
    pub window: EpochWindow,
    pub epochs: Vec<Epoch>,
    pub skipped: Vec<Skipped>,
}

/// Per-label accounting: `events = kept + rejected + skipped`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub events: usize,
    pub kept: usize,
    pub rejected: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RejectionReport {
    pub per_label: BTreeMap<String, LabelCounts>,
    /// `(event_index, label, reason)` for every rejected or skipped event.
    pub entries: Vec<(usize, String, String)>,
}

impl RejectionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,events,kept,rejected,skipped\n");
        for (label, c) in &self.per_label {
            let _ = writeln!(out, "{label},{},{},{},{}", c.events, c.kept, c.rejected, c.skipped);
        }
        out
    }

    pub fn entries_csv(&self) -> String {
        let mut out = String::from("event_index,label,reason\n");
        for (i, label, reason) in &self.entries {
            let _ = writeln!(out, "{i},{label},{reason}");
        }
        out
    }
}

/// Cuts one epoch per event. Events whose window leaves the recording are
/// skipped and listed in `skipped`.
pub fn epoch(rec: &Recording, events: &EventList, window: EpochWindow, subject: &str) -> EpochSet {
    let n = rec.samples();
    let mut epochs = Vec::new();
    let mut skipped = Vec::new();
    for (i, ev) in events.events.iter().enumerate() {
        let onset = (ev.time * rec.sample_rate).round();
        let fits = onset >= window.pre as f64 && onset + (window.post as f64) < n as f64;
        if !fits {
            skipped.push(Skipped {
                event_index: i,
                time: ev.time,
                label: ev.label.clone(),
                reason: "window outside recording".into(),
            });
            continue;
        }
        let start = onset as usize - window.pre;
        epochs.push(Epoch {
            event_index: i,
            onset_time: ev.time,
            label: ev.label.clone(),
            condition: ev.condition.clone(),
            subject: subject.to_string(),
            data: rec
                .data
                .iter()
                .map(|ch| ch[start..start + window.len()].to_vec())
                .collect(),
            rejected: None,
        });
    }
    EpochSet {
        sample_rate: rec.sample_rate,
        channels: rec.channels.clone(),
        window,
        epochs,
        skipped,
    }
}

impl EpochSet {
    pub fn kept(&self) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(|e| e.is_kept())
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ErpError::UnknownChannel(name.to_string()))
    }

    pub fn report(&self) -> RejectionReport {
        let mut report = RejectionReport::default();
        let mut entries = Vec::new();
        for e in &self.epochs {
            let c = report.per_label.entry(e.label.clone()).or_default();
            c.events += 1;
            match &e.rejected {
                None => c.kept += 1,
                Some(r) => {
                    c.rejected += 1;
                    entries.push((e.event_index, e.label.clone(), r.to_string()));
                }
            }
        }
        for s in &self.skipped {
            let c = report.per_label.entry(s.label.clone()).or_default();
            c.events += 1;
            c.skipped += 1;
            entries.push((s.event_index, s.label.clone(), s.reason.clone()));
        }
        entries.sort_by_key(|e| e.0);
        report.entries = entries;
        report
    }

    /// Same time base: rate, channels and window.
    pub fn check_compatible(&self, other: &EpochSet) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(ErpError::TimeBaseMismatch(format!(
                "{} Hz vs {} Hz",
                self.sample_rate, other.sample_rate
            )));
        }
        if self.window != other.window {
            return Err(ErpError::TimeBaseMismatch("epoch windows differ".into()));
        }
        if self.channels != other.channels {
            return Err(ErpError::TimeBaseMismatch("channel lists differ".into()));
        }
        Ok(())
    }
}

/// Flags kept epochs with any `|v| > threshold_uv` on the listed channels.
/// Already rejected epochs stay rejected.
pub fn reject_artifacts(set: &EpochSet, threshold_uv: f64, channels: &[String], exec: Execution) -> Result<EpochSet> {
    let idx: Vec<usize> = channels.iter().map(|c| set.channel_index(c)).collect::<Result<_>>()?;
    let mut out = set.clone();
    exec.for_each_mut(&mut out.epochs, |e| {
        if e.rejected.is_some() {
            return;
        }
        for &c in &idx {
            // First exceeding sample on the first listed channel that has one.
            if let Some(&v) = e.data[c].iter().find(|v| v.abs() > threshold_uv) {
                e.rejected = Some(RejectReason::Amplitude {
                    channel: set.channels[c].clone(),
                    value: v,
                });
                return;
            }
        }
    });
    Ok(out)
}

/// Marks epochs whose event index appears in `event_indices` as excluded.
pub fn apply_exclusions(set: &EpochSet, event_indices: &[usize]) -> EpochSet {
    let mut out = set.clone();
    for e in &mut out.epochs {
        if e.rejected.is_none() && event_indices.contains(&e.event_index) {
            e.rejected = Some(RejectReason::Excluded);
        }
    }
    out
}

/// Reads an exclusion list: header `event_index`, one index per row.
pub fn read_exclusions(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ErpError::Parse {
        row: 1,
        column: "header".into(),
        message: e.to_string(),
    })?;
    if header.iter().next() != Some("event_index") {
        return Err(ErpError::Parse {
            row: 1,
            column: "header".into(),
            message: "expected event_index".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ErpError::Parse {
            row: i + 2,
            column: "event_index".into(),
            message: e.to_string(),
        })?;
        out.push(
            rec[0]
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| ErpError::Parse {
                    row: i + 2,
                    column: "event_index".into(),
                    message: e.to_string(),
                })?,
        );
    }
    Ok(out)
}

/// Subtracts the mean of the pre-onset samples, per channel and epoch.
pub fn baseline_correct(set: &EpochSet, exec: Execution) -> EpochSet {
    let pre = set.window.pre;
    let mut out = set.clone();
    if pre == 0 {
        return out;
    }
    exec.for_each_mut(&mut out.epochs, |e| {
        for ch in &mut e.data {
            let mean = ch[..pre].iter().sum::<f64>() / pre as f64;
            for v in ch.iter_mut() {
                *v -= mean;
            }
        }
    });
    out
}
