//! N170 peak extraction and the channel × label amplitude table.

use std::fmt::Write as _;

use crate::average::ErpWaveform;
use crate::error::{ErpError, Result};
use crate::filter::{Butterworth, Padding};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct N170Options {
    /// Search window, ms after onset.
    pub window_ms: (f64, f64),
    /// Optional zero-phase band applied to the waveform first.
    pub erp_band: Option<(f64, f64)>,
    pub order: usize,
    pub padding: Padding,
}

impl Default for N170Options {
    fn default() -> Self {
        N170Options {
            window_ms: (130.0, 190.0),
            erp_band: None,
            order: 4,
            padding: Padding::Constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct N170Measure {
    pub channel: String,
    /// Window minimum, µV.
    pub amplitude: f64,
    /// Time of the window minimum, ms.
    pub latency_ms: f64,
    /// Time at which half of the negative area in the window is reached.
    pub fractional_latency_ms: Option<f64>,
    pub window_ms: (f64, f64),
}

/// Sample range `[first, last]` covered by the window.
pub fn window_samples(window_ms: (f64, f64), pre: usize, post: usize, sample_rate: f64) -> Result<(usize, usize)> {
    let (start_ms, end_ms) = window_ms;
    let span_start_ms = -(pre as f64) / sample_rate * 1000.0;
    let span_end_ms = post as f64 / sample_rate * 1000.0;
    if !(start_ms <= end_ms && start_ms >= span_start_ms && end_ms <= span_end_ms) {
        return Err(ErpError::WindowOutsideSpan {
            start_ms,
            end_ms,
            span_start_ms,
            span_end_ms,
        });
    }
    // Small slack so window edges that land on a sample are included.
    let first = (start_ms / 1000.0 * sample_rate - 1e-9).ceil() as i64 + pre as i64;
    let last = (end_ms / 1000.0 * sample_rate + 1e-9).floor() as i64 + pre as i64;
    if last < first {
        return Err(ErpError::WindowOutsideSpan {
            start_ms,
            end_ms,
            span_start_ms,
            span_end_ms,
        });
    }
    Ok((first as usize, last as usize))
}

/// Applies the optional ERP band to one channel of a waveform.
pub fn erp_trace(w: &ErpWaveform, ch: usize, opts: &N170Options) -> Result<Vec<f64>> {
    match opts.erp_band {
        Some((lo, hi)) => {
            Ok(Butterworth::design(opts.order, lo, hi, w.sample_rate)?.filtfilt_with(&w.data[ch], opts.padding))
        }
        None => Ok(w.data[ch].clone()),
    }
}

/// Window minimum of an already prepared trace. Ties go to the earliest sample.
pub fn measure_trace(
    trace: &[f64],
    channel: &str,
    pre: usize,
    sample_rate: f64,
    window_ms: (f64, f64),
) -> Result<N170Measure> {
    let post = trace.len().saturating_sub(pre + 1);
    let (first, last) = window_samples(window_ms, pre, post, sample_rate)?;
    let mut best = first;
    for i in first..=last {
        if trace[i] < trace[best] {
            best = i;
        }
    }
    let t = |i: f64| (i - pre as f64) / sample_rate * 1000.0;
    Ok(N170Measure {
        channel: channel.to_string(),
        amplitude: trace[best],
        latency_ms: t(best as f64),
        fractional_latency_ms: fractional_area_latency(&trace[first..=last], 0.5).map(|x| t(first as f64 + x)),
        window_ms,
    })
}

/// Position (in samples, fractional) at which the cumulative negative area
/// reaches `fraction` of its total. Trapezoidal, linear within a step.
fn fractional_area_latency(x: &[f64], fraction: f64) -> Option<f64> {
    let neg: Vec<f64> = x.iter().map(|v| (-v).max(0.0)).collect();
    let steps: Vec<f64> = neg.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let total: f64 = steps.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for (i, &a) in steps.iter().enumerate() {
        if acc + a >= target && a > 0.0 {
            return Some(i as f64 + (target - acc) / a);
        }
        acc += a;
    }
    Some((x.len() - 1) as f64)
}

pub fn n170(w: &ErpWaveform, channel: &str, opts: &N170Options) -> Result<N170Measure> {
    let ch = w.channel_index(channel)?;
    let trace = erp_trace(w, ch, opts)?;
    measure_trace(&trace, channel, w.window.pre, w.sample_rate, opts.window_ms)
}

/// N170 amplitudes, rows in recording channel order, columns in waveform order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    pub channels: Vec<String>,
    pub labels: Vec<String>,
    /// `amplitude[channel][label]`, µV.
    pub amplitude: Vec<Vec<f64>>,
    pub latency_ms: Vec<Vec<f64>>,
}

pub fn channel_table(waveforms: &[ErpWaveform], opts: &N170Options) -> Result<ChannelTable> {
    let channels = waveforms.first().map(|w| w.channels.clone()).unwrap_or_default();
    if let Some(w) = waveforms.iter().find(|w| w.channels != channels) {
        return Err(ErpError::TimeBaseMismatch(format!(
            "{} has a different channel list",
            w.label
        )));
    }
    let mut amplitude = vec![Vec::with_capacity(waveforms.len()); channels.len()];
    let mut latency_ms = amplitude.clone();
    for w in waveforms {
        for (c, name) in channels.iter().enumerate() {
            let m = n170(w, name, opts)?;
            amplitude[c].push(m.amplitude);
            latency_ms[c].push(m.latency_ms);
        }
    }
    Ok(ChannelTable {
        channels,
        labels: waveforms.iter().map(|w| w.label.clone()).collect(),
        amplitude,
        latency_ms,
    })
}

impl ChannelTable {
    fn csv(&self, values: &[Vec<f64>]) -> String {
        let mut out = String::from("channel");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (c, row) in self.channels.iter().zip(values) {
            out.push_str(c);
            for v in row {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn amplitude_csv(&self) -> String {
        self.csv(&self.amplitude)
    }

    pub fn latency_csv(&self) -> String {
        self.csv(&self.latency_ms)
    }
}
