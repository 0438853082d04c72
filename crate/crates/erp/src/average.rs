//! Grand averaging of kept epochs into ERP waveforms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::epoch::{Epoch, EpochSet, EpochWindow};
use crate::error::{ErpError, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AverageMode {
    /// Mean per subject, then mean across subjects (equal subject weight).
    #[default]
    SubjectsThenGrand,
    /// Mean over all trials regardless of subject.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    #[default]
    Label,
    Condition,
    /// `label/condition`.
    LabelAndCondition,
}

impl GroupBy {
    pub fn key(self, e: &Epoch) -> String {
        match self {
            GroupBy::Label => e.label.clone(),
            GroupBy::Condition => e.condition.clone(),
            GroupBy::LabelAndCondition => format!("{}/{}", e.label, e.condition),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErpWaveform {
    pub label: String,
    pub sample_rate: f64,
    pub channels: Vec<String>,
    pub window: EpochWindow,
    /// `channels × window.len()`, µV.
    pub data: Vec<Vec<f64>>,
    pub trials: usize,
    pub subjects: usize,
}

impl ErpWaveform {
    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ErpError::UnknownChannel(name.to_string()))
    }

    pub fn time_ms(&self, i: usize) -> f64 {
        self.window.time_ms(i, self.sample_rate)
    }

    /// `time_ms,<channels…>`; values in shortest round-trip form so a reload
    /// is exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ms");
        for ch in &self.channels {
            out.push(',');
            out.push_str(ch);
        }
        out.push('\n');
        for i in 0..self.window.len() {
            let _ = write!(out, "{}", self.time_ms(i));
            for ch in &self.data {
                let _ = write!(out, ",{}", ch[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(label: &str, text: &str, sample_rate: f64) -> Result<ErpWaveform> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| ErpError::Parse {
                row: 1,
                column: "header".into(),
                message: e.to_string(),
            })?
            .clone();
        if header.get(0) != Some("time_ms") || header.len() < 2 {
            return Err(ErpError::Parse {
                row: 1,
                column: "header".into(),
                message: "expected time_ms followed by channels".into(),
            });
        }
        let channels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut data = vec![Vec::new(); channels.len()];
        let mut first_time = None;
        for (i, rec) in reader.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| ErpError::Parse {
                row,
                column: "record".into(),
                message: e.to_string(),
            })?;
            let parse = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| ErpError::Parse {
                        row,
                        column: header.get(c).unwrap_or("?").to_string(),
                        message: "not a number".into(),
                    })
            };
            first_time.get_or_insert(parse(0)?);
            for (c, ch) in data.iter_mut().enumerate() {
                ch.push(parse(c + 1)?);
            }
        }
        let n = data[0].len();
        let t0 = first_time.ok_or_else(|| ErpError::InvalidRecording("empty waveform".into()))?;
        let pre = (-t0 / 1000.0 * sample_rate).round() as usize;
        if n <= pre {
            return Err(ErpError::InvalidRecording("waveform has no post-onset samples".into()));
        }
        Ok(ErpWaveform {
            label: label.to_string(),
            sample_rate,
            channels,
            window: EpochWindow { pre, post: n - 1 - pre },
            data,
            trials: 0,
            subjects: 0,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrandAverage {
    /// Sorted by group key.
    pub waveforms: Vec<ErpWaveform>,
    pub warnings: Vec<String>,
}

impl GrandAverage {
    pub fn get(&self, label: &str) -> Option<&ErpWaveform> {
        self.waveforms.iter().find(|w| w.label == label)
    }
}

fn mean_of(epochs: &[&Epoch], channels: usize, len: usize) -> Vec<Vec<f64>> {
    let mut acc = vec![vec![0.0; len]; channels];
    for e in epochs {
        for (a, d) in acc.iter_mut().zip(&e.data) {
            for (x, y) in a.iter_mut().zip(d) {
                *x += y;
            }
        }
    }
    let n = epochs.len() as f64;
    for a in &mut acc {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    acc
}

/// Averages kept epochs of all sets per group. Groups present only through
/// rejected or skipped events are reported in `warnings` and omitted.
pub fn grand_average(sets: &[EpochSet], group_by: GroupBy, mode: AverageMode, exec: Execution) -> Result<GrandAverage> {
    let Some(first) = sets.first() else {
        return Ok(GrandAverage::default());
    };
    for s in &sets[1..] {
        first.check_compatible(s)?;
    }

    let mut groups: BTreeMap<String, Vec<&Epoch>> = BTreeMap::new();
    let mut all_labels = BTreeSet::new();
    for s in sets {
        for e in &s.epochs {
            all_labels.insert(group_by.key(e));
            if e.is_kept() {
                groups.entry(group_by.key(e)).or_default().push(e);
            }
        }
        if group_by == GroupBy::Label {
            all_labels.extend(s.skipped.iter().map(|k| k.label.clone()));
        }
    }
    let warnings = all_labels
        .iter()
        .filter(|l| !groups.contains_key(*l))
        .map(|l| format!("{l}: no surviving epochs"))
        .collect();

    let nch = first.channels.len();
    let len = first.window.len();
    let groups: Vec<(String, Vec<&Epoch>)> = groups.into_iter().collect();
    let waveforms = exec.map(&groups, |(label, epochs)| {
        let mut by_subject: BTreeMap<&str, Vec<&Epoch>> = BTreeMap::new();
        for e in epochs {
            by_subject.entry(e.subject.as_str()).or_default().push(e);
        }
        let data = match mode {
            AverageMode::Pooled => mean_of(epochs, nch, len),
            AverageMode::SubjectsThenGrand => {
                let means: Vec<Vec<Vec<f64>>> = by_subject.values().map(|es| mean_of(es, nch, len)).collect();
                let mut acc = vec![vec![0.0; len]; nch];
                for m in &means {
                    for (a, d) in acc.iter_mut().zip(m) {
                        for (x, y) in a.iter_mut().zip(d) {
                            *x += y;
                        }
                    }
                }
                for a in &mut acc {
                    for x in a.iter_mut() {
                        *x /= means.len() as f64;
                    }
                }
                acc
            }
        };
        ErpWaveform {
            label: label.clone(),
            sample_rate: first.sample_rate,
            channels: first.channels.clone(),
            window: first.window,
            data,
            trials: epochs.len(),
            subjects: by_subject.len(),
        }
    });
    Ok(GrandAverage { waveforms, warnings })
}
