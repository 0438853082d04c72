//! Full analysis run: band-pass, epoch, reject, baseline, average, N170.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::average::{grand_average, AverageMode, ErpWaveform, GrandAverage, GroupBy};
use crate::epoch::{
    apply_exclusions, baseline_correct, epoch, reject_artifacts, EpochSet, EpochWindow, RejectionReport,
};
use crate::error::Result;
use crate::exec::Execution;
use crate::filter::{bandpass_zero_phase, Butterworth, Padding};
use crate::n170::{channel_table, measure_trace, n170, ChannelTable, N170Measure, N170Options};
use crate::recording::{EventList, Recording};
use crate::stats::{anova1, AnovaResult};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub band: (f64, f64),
    pub order: usize,
    pub erp_band: Option<(f64, f64)>,
    pub reject_uv: f64,
    pub reject_channels: Vec<String>,
    pub pre_ms: f64,
    pub post_ms: f64,
    pub window_ms: (f64, f64),
    pub average: AverageMode,
    pub exclusions: Vec<usize>,
    pub subject: String,
    /// Channel for trial-level statistics; the most negative channel of the
    /// N170 table when unset.
    pub stats_channel: Option<String>,
    pub execution: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            band: (0.1, 20.0),
            order: 4,
            erp_band: Some((1.0, 5.0)),
            reject_uv: 70.0,
            reject_channels: vec!["Fp1".into(), "Fp2".into()],
            pre_ms: 100.0,
            post_ms: 400.0,
            window_ms: (130.0, 190.0),
            average: AverageMode::default(),
            exclusions: Vec::new(),
            subject: "s01".into(),
            stats_channel: None,
            execution: Execution::default(),
        }
    }
}

impl PipelineConfig {
    pub fn n170_options(&self) -> N170Options {
        N170Options {
            window_ms: self.window_ms,
            erp_band: self.erp_band,
            order: self.order,
            padding: Padding::Constant,
        }
    }
}

/// Trial-level N170 amplitudes compared across groups.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaReport {
    pub channel: String,
    pub group_by: GroupBy,
    pub groups: Vec<(String, usize, f64)>,
    pub result: AnovaResult,
}

impl AnovaReport {
    pub fn to_text(&self) -> String {
        let by = match self.group_by {
            GroupBy::Label => "label",
            GroupBy::Condition => "condition",
            GroupBy::LabelAndCondition => "label/condition",
        };
        let mut out = String::new();
        let _ = writeln!(out, "measure,trial N170 amplitude (uV)");
        let _ = writeln!(out, "channel,{}", self.channel);
        let _ = writeln!(out, "group_by,{by}");
        let _ = writeln!(out, "F,{}", self.result.f);
        let _ = writeln!(out, "df_between,{}", self.result.df_between);
        let _ = writeln!(out, "df_within,{}", self.result.df_within);
        let _ = writeln!(out, "p,{:e}", self.result.p);
        let _ = writeln!(out, "group,n,mean_uv");
        for (g, n, m) in &self.groups {
            let _ = writeln!(out, "{g},{n},{m:.6}");
        }
        out
    }
}

/// Per-label latency and amplitude difference between two conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionDelta {
    pub label: String,
    pub channel: String,
    pub condition_a: String,
    pub condition_b: String,
    /// `b − a`.
    pub latency_delta_ms: f64,
    pub amplitude_delta_uv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub epochs: EpochSet,
    pub report: RejectionReport,
    pub average: GrandAverage,
    pub measures: Vec<(String, Vec<N170Measure>)>,
    pub table: ChannelTable,
    pub anova: Option<AnovaReport>,
    pub deltas: Vec<ConditionDelta>,
}

pub fn run_pipeline(rec: &Recording, events: &EventList, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    events.check_within(rec)?;
    let exec = cfg.execution;
    let filtered = bandpass_zero_phase(rec, cfg.band.0, cfg.band.1, cfg.order, exec)?;
    let window = EpochWindow::from_ms(cfg.pre_ms, cfg.post_ms, rec.sample_rate)?;
    let set = epoch(&filtered, events, window, &cfg.subject);
    let set = apply_exclusions(&set, &cfg.exclusions);
    let set = reject_artifacts(&set, cfg.reject_uv, &cfg.reject_channels, exec)?;
    let set = baseline_correct(&set, exec);
    analyze(set, cfg)
}

/// Averaging and measurement on already prepared epochs.
pub fn analyze(set: EpochSet, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let exec = cfg.execution;
    let opts = cfg.n170_options();
    let report = set.report();
    let average = grand_average(std::slice::from_ref(&set), GroupBy::Label, cfg.average, exec)?;

    let measures = exec.map(&average.waveforms, |w| {
        let m: Result<Vec<N170Measure>> = w.channels.iter().map(|c| n170(w, c, &opts)).collect();
        m.map(|m| (w.label.clone(), m))
    });
    let measures: Vec<(String, Vec<N170Measure>)> = measures.into_iter().collect::<Result<_>>()?;
    let table = channel_table(&average.waveforms, &opts)?;

    let stats_channel = match &cfg.stats_channel {
        Some(c) => Some(c.clone()),
        None => most_negative_channel(&table),
    };
    let (anova, deltas) = match &stats_channel {
        Some(ch) => (trial_anova(&set, ch, cfg)?, condition_deltas(&set, ch, cfg)?),
        None => (None, Vec::new()),
    };

    Ok(PipelineOutput {
        epochs: set,
        report,
        average,
        measures,
        table,
        anova,
        deltas,
    })
}

fn most_negative_channel(table: &ChannelTable) -> Option<String> {
    table
        .channels
        .iter()
        .zip(&table.amplitude)
        .filter(|(_, row)| !row.is_empty())
        .map(|(c, row)| (c, row.iter().sum::<f64>() / row.len() as f64))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c.clone())
}

/// Single-trial N170 amplitudes grouped by condition when several are
/// present, otherwise by label. `None` when fewer than two groups have two
/// or more trials.
fn trial_anova(set: &EpochSet, channel: &str, cfg: &PipelineConfig) -> Result<Option<AnovaReport>> {
    let ch = set.channel_index(channel)?;
    let conditions: std::collections::BTreeSet<&str> = set.kept().map(|e| e.condition.as_str()).collect();
    let group_by = if conditions.len() > 1 {
        GroupBy::Condition
    } else {
        GroupBy::Label
    };
    let filter = match cfg.erp_band {
        Some((lo, hi)) => Some(Butterworth::design(cfg.order, lo, hi, set.sample_rate)?),
        None => None,
    };
    let kept: Vec<_> = set.kept().collect();
    let amps = cfg.execution.map(&kept, |e| {
        let trace = match &filter {
            Some(f) => f.filtfilt_with(&e.data[ch], Padding::Constant),
            None => e.data[ch].clone(),
        };
        measure_trace(&trace, channel, set.window.pre, set.sample_rate, cfg.window_ms).map(|m| m.amplitude)
    });
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (e, a) in kept.iter().zip(amps) {
        groups.entry(group_by.key(e)).or_default().push(a?);
    }
    groups.retain(|_, v| v.len() >= 2);
    if groups.len() < 2 {
        return Ok(None);
    }
    let summary = groups
        .iter()
        .map(|(k, v)| (k.clone(), v.len(), v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let values: Vec<Vec<f64>> = groups.into_values().collect();
    Ok(Some(AnovaReport {
        channel: channel.to_string(),
        group_by,
        groups: summary,
        result: anova1(&values)?,
    }))
}

fn condition_deltas(set: &EpochSet, channel: &str, cfg: &PipelineConfig) -> Result<Vec<ConditionDelta>> {
    let ga = grand_average(
        std::slice::from_ref(set),
        GroupBy::LabelAndCondition,
        cfg.average,
        cfg.execution,
    )?;
    let mut by_label: BTreeMap<&str, Vec<(&str, &ErpWaveform)>> = BTreeMap::new();
    for w in &ga.waveforms {
        if let Some((label, condition)) = w.label.split_once('/') {
            by_label.entry(label).or_default().push((condition, w));
        }
    }
    let opts = cfg.n170_options();
    let mut out = Vec::new();
    for (label, ws) in by_label {
        for i in 0..ws.len() {
            for j in i + 1..ws.len() {
                let a = n170(ws[i].1, channel, &opts)?;
                let b = n170(ws[j].1, channel, &opts)?;
                out.push(ConditionDelta {
                    label: label.to_string(),
                    channel: channel.to_string(),
                    condition_a: ws[i].0.to_string(),
                    condition_b: ws[j].0.to_string(),
                    latency_delta_ms: b.latency_ms - a.latency_ms,
                    amplitude_delta_uv: b.amplitude - a.amplitude,
                });
            }
        }
    }
    Ok(out)
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl PipelineOutput {
    pub fn measures_csv(&self) -> String {
        let mut out = String::from("label,channel,trials,amplitude_uv,latency_ms,fractional_latency_ms\n");
        for (label, ms) in &self.measures {
            let trials = self.average.get(label).map_or(0, |w| w.trials);
            for m in ms {
                let frac = m.fractional_latency_ms.map_or(String::new(), |v| format!("{v:.3}"));
                let _ = writeln!(
                    out,
                    "{label},{},{trials},{:.6},{:.3},{frac}",
                    m.channel, m.amplitude, m.latency_ms
                );
            }
        }
        out
    }

    pub fn deltas_csv(&self) -> String {
        let mut out = String::from("label,channel,condition_a,condition_b,latency_delta_ms,amplitude_delta_uv\n");
        for d in &self.deltas {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{:.6}",
                d.label, d.channel, d.condition_a, d.condition_b, d.latency_delta_ms, d.amplitude_delta_uv
            );
        }
        out
    }

    /// Writes every table into `dir` (created if needed).
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for w in &self.average.waveforms {
            w.write(dir.join(format!("waveform_{}.csv", file_safe(&w.label))))?;
        }
        std::fs::write(dir.join("n170.csv"), self.measures_csv())?;
        std::fs::write(dir.join("n170_channels.csv"), self.table.amplitude_csv())?;
        std::fs::write(dir.join("rejection.csv"), self.report.to_csv())?;
        std::fs::write(dir.join("rejection_events.csv"), self.report.entries_csv())?;
        std::fs::write(dir.join("condition_deltas.csv"), self.deltas_csv())?;
        let anova = match &self.anova {
            Some(a) => a.to_text(),
            None => "not computed: fewer than two groups with two or more trials\n".into(),
        };
        std::fs::write(dir.join("anova.csv"), anova)?;
        let mut warnings = String::new();
        for w in &self.average.warnings {
            let _ = writeln!(warnings, "{w}");
        }
        std::fs::write(dir.join("warnings.txt"), warnings)?;
        Ok(())
    }
}
