//! Continuous recordings and stimulus event lists, with their CSV formats.
//!
//! Recording file: header `time_s,<ch1>,<ch2>,…`, one row per sample, time
//! in seconds from the first sample (9 decimals), values in µV (6 decimals).
//! The sample rate is recovered from the time column.
//!
//! Events file: header `time_s,label,condition`, times in seconds from the
//! recording start, non-decreasing.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ErpError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sample_rate: f64,
    pub channels: Vec<String>,
    /// `channels × samples`, µV.
    pub data: Vec<Vec<f64>>,
    /// Wall-clock start, if known (free-form ISO-8601 text).
    pub start_time: Option<String>,
}

impl Recording {
    pub fn new(sample_rate: f64, channels: Vec<String>, data: Vec<Vec<f64>>) -> Result<Recording> {
        let rec = Recording {
            sample_rate,
            channels,
            data,
            start_time: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(ErpError::InvalidRecording(format!(
                "sample rate {} must be positive",
                self.sample_rate
            )));
        }
        if self.channels.len() != self.data.len() {
            return Err(ErpError::InvalidRecording(format!(
                "{} labels for {} channels",
                self.channels.len(),
                self.data.len()
            )));
        }
        let mut seen = HashSet::new();
        for ch in &self.channels {
            if !seen.insert(ch.as_str()) {
                return Err(ErpError::InvalidRecording(format!("duplicate channel {ch}")));
            }
        }
        let n = self.samples();
        if self.data.iter().any(|c| c.len() != n) {
            return Err(ErpError::InvalidRecording("channels differ in length".into()));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    /// Time span covered, seconds from the first to the last sample.
    pub fn duration(&self) -> f64 {
        self.samples().saturating_sub(1) as f64 / self.sample_rate
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ErpError::UnknownChannel(name.to_string()))
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: f64) -> Recording {
        let mut out = self.clone();
        for ch in &mut out.data {
            for v in ch.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s");
        for ch in &self.channels {
            out.push(',');
            out.push_str(ch);
        }
        out.push('\n');
        for i in 0..self.samples() {
            let _ = write!(out, "{:.9}", i as f64 / self.sample_rate);
            for ch in &self.data {
                let _ = write!(out, ",{:.6}", ch[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Recording> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| parse_err(1, "header", e))?.clone();
        if header.get(0) != Some("time_s") {
            return Err(ErpError::Parse {
                row: 1,
                column: header.get(0).unwrap_or("").to_string(),
                message: "first column must be time_s".into(),
            });
        }
        let channels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        if channels.is_empty() {
            return Err(ErpError::Parse {
                row: 1,
                column: "header".into(),
                message: "no channel columns".into(),
            });
        }
        let mut times = Vec::new();
        let mut data = vec![Vec::new(); channels.len()];
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| parse_err(row, "record", e))?;
            if record.len() != header.len() {
                return Err(ErpError::Parse {
                    row,
                    column: "record".into(),
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            times.push(parse_f64(&record[0], row, "time_s")?);
            for (c, ch) in channels.iter().enumerate() {
                data[c].push(parse_f64(&record[c + 1], row, ch)?);
            }
        }
        if times.len() < 2 {
            return Err(ErpError::InvalidRecording(
                "at least two samples are needed to infer the sample rate".into(),
            ));
        }
        let span = times[times.len() - 1] - times[0];
        if span <= 0.0 {
            return Err(ErpError::InvalidRecording("time column must increase".into()));
        }
        let rate = ((times.len() - 1) as f64 / span * 1e6).round() / 1e6;
        for (i, &t) in times.iter().enumerate() {
            if (t - times[0] - i as f64 / rate).abs() > 1e-6 {
                return Err(ErpError::Parse {
                    row: i + 2,
                    column: "time_s".into(),
                    message: "samples are not evenly spaced".into(),
                });
            }
        }
        Recording::new(rate, channels, data)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Recording> {
        Recording::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn parse_err(row: usize, column: &str, e: impl std::fmt::Display) -> ErpError {
    ErpError::Parse {
        row,
        column: column.to_string(),
        message: e.to_string(),
    }
}

fn parse_f64(field: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|e| parse_err(row, column, format!("{field:?}: {e}")))?;
    if !v.is_finite() {
        return Err(parse_err(row, column, "value is not finite"));
    }
    Ok(v)
}

/// One stimulus onset.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Seconds from the recording start.
    pub time: f64,
    /// Stimulus label, typically the emotion shown.
    pub label: String,
    /// Presentation source or condition (e.g. `monitor`, `robot`).
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventList {
    pub events: Vec<Event>,
}

impl EventList {
    pub fn new(events: Vec<Event>) -> Result<EventList> {
        let list = EventList { events };
        list.check_order()?;
        Ok(list)
    }

    fn check_order(&self) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(ErpError::InvalidEvents(format!(
                    "event {i} has invalid time {}",
                    e.time
                )));
            }
            if i > 0 && e.time < self.events[i - 1].time {
                return Err(ErpError::InvalidEvents(format!(
                    "event {i} at {} s precedes the previous event",
                    e.time
                )));
            }
        }
        Ok(())
    }

    /// Rejects events outside the recording span.
    pub fn check_within(&self, rec: &Recording) -> Result<()> {
        let end = rec.duration();
        for (i, e) in self.events.iter().enumerate() {
            if e.time > end {
                return Err(ErpError::InvalidEvents(format!(
                    "event {i} at {} s is beyond the recording end ({end} s)",
                    e.time
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,label,condition\n");
        for e in &self.events {
            let _ = writeln!(out, "{:.9},{},{}", e.time, e.label, e.condition);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<EventList> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| parse_err(1, "header", e))?.clone();
        let expected = ["time_s", "label", "condition"];
        if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(ErpError::Parse {
                row: 1,
                column: "header".into(),
                message: "expected time_s,label,condition".into(),
            });
        }
        let mut events = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| parse_err(row, "record", e))?;
            if record.len() != 3 {
                return Err(parse_err(row, "record", "expected 3 fields"));
            }
            let time = parse_f64(&record[0], row, "time_s")?;
            let label = record[1].trim().to_string();
            if label.is_empty() {
                return Err(parse_err(row, "label", "empty label"));
            }
            events.push(Event {
                time,
                label,
                condition: record[2].trim().to_string(),
            });
        }
        EventList::new(events)
    }

    /// Reads an events file and checks it against the recording span.
    pub fn read_for(path: impl AsRef<Path>, rec: &Recording) -> Result<EventList> {
        let list = EventList::from_csv(&std::fs::read_to_string(path)?)?;
        list.check_within(rec)?;
        Ok(list)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Floors every onset to the frame grid of a `fps` camera.
pub fn quantize_onsets(events: &EventList, fps: f64) -> Result<EventList> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(ErpError::InvalidSpec(format!("fps {fps} must be positive")));
    }
    let events = events
        .events
        .iter()
        .map(|e| Event {
            time: (e.time * fps).floor() / fps,
            ..e.clone()
        })
        .collect();
    Ok(EventList { events })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_recording() {
        let mut text = String::from("time_s,Cz\n");
        for i in 0..10 {
            text.push_str(&format!("{},{}\n", i as f64 / 256.0, i as f64 * 0.5));
        }
        let rec = Recording::from_csv(&text).unwrap();
        assert_eq!(rec.sample_rate, 256.0);
        assert_eq!(rec.channels, vec!["Cz"]);
        assert_eq!(rec.data[0], (0..10).map(|i| i as f64 * 0.5).collect::<Vec<_>>());
    }

    #[test]
    fn csv_round_trip() {
        let data = vec![
            (0..50).map(|i| (i as f64 * 0.37).sin() * 12.5).collect(),
            (0..50).map(|i| i as f64 - 25.25).collect(),
        ];
        let rec = Recording::new(256.0, vec!["Fp1".into(), "Oz".into()], data).unwrap();
        let text = rec.to_csv();
        let back = Recording::from_csv(&text).unwrap();
        assert_eq!(back.sample_rate, 256.0);
        assert_eq!(back.to_csv(), text);
        for (a, b) in rec.data.iter().flatten().zip(back.data.iter().flatten()) {
            assert!((a - b).abs() <= 5e-7);
        }

        let events = EventList::new(vec![
            Event {
                time: 0.05,
                label: "happy".into(),
                condition: "robot".into(),
            },
            Event {
                time: 0.1,
                label: "sad".into(),
                condition: "monitor".into(),
            },
        ])
        .unwrap();
        assert_eq!(EventList::from_csv(&events.to_csv()).unwrap(), events);
    }

    #[test]
    fn schema_errors_name_location() {
        let err = Recording::from_csv("time_s,Cz,Pz\n0,1,2\n0.1,1\n").unwrap_err();
        assert!(matches!(err, ErpError::Parse { row: 3, .. }), "{err}");
        let err = Recording::from_csv("time_s,Cz\n0,1\n0.1,abc\n").unwrap_err();
        match err {
            ErpError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "Cz");
            }
            other => panic!("{other}"),
        }
        assert!(Recording::from_csv("t,Cz\n0,1\n").is_err());
        assert!(Recording::from_csv("time_s,Cz,Cz\n0,1,1\n0.1,1,1\n").is_err());
        assert!(Recording::from_csv("time_s,Cz\n0,1\n0.1,1\n0.3,1\n").is_err());
    }

    #[test]
    fn events_beyond_end_rejected() {
        let rec = Recording::new(256.0, vec!["Cz".into()], vec![vec![0.0; 257]]).unwrap();
        let ok = EventList::from_csv("time_s,label,condition\n0.5,happy,robot\n1.0,sad,robot\n").unwrap();
        ok.check_within(&rec).unwrap();
        let late = EventList::from_csv("time_s,label,condition\n1.5,happy,robot\n").unwrap();
        assert!(matches!(late.check_within(&rec), Err(ErpError::InvalidEvents(_))));
        assert!(EventList::from_csv("time_s,label,condition\n1.0,a,x\n0.5,b,x\n").is_err());
    }

    #[test]
    fn onset_quantization() {
        let ev = |t| Event {
            time: t,
            label: "x".into(),
            condition: String::new(),
        };
        let list = EventList::new(vec![ev(1.0), ev(1.02)]).unwrap();
        let q = quantize_onsets(&list, 26.0).unwrap();
        assert_eq!(q.events[0].time, 1.0);
        assert_eq!(q.events[1].time, (1.02f64 * 26.0).floor() / 26.0);
        assert!((q.events[1].time - 1.0).abs() < 1e-12);
        assert!(quantize_onsets(&list, 0.0).is_err());
    }
}
