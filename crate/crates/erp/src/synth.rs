//! Synthetic EEG with known N170 deflections and artifacts.
//!
//! Noise is 1/f-shaped (white Gaussian through Kellet's pink filter),
//! rescaled per channel to the requested rms. Each event can carry a
//! negative Gaussian deflection (`n170`) and an oscillatory burst
//! (`artifact`) used to exercise the rejection stage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ErpError, Result};
use crate::exec::Execution;
use crate::recording::{Event, EventList, Recording};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub latency_ms: f64,
    /// Peak value, µV (negative for an N170).
    pub amplitude_uv: f64,
    /// Gaussian standard deviation, ms.
    pub width_ms: f64,
    pub channels: Vec<String>,
}

/// A Gaussian-windowed 6 Hz burst with peak `amplitude_uv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    pub channel: String,
    pub amplitude_uv: f64,
    #[serde(default = "default_artifact_latency")]
    pub latency_ms: f64,
}

fn default_artifact_latency() -> f64 {
    300.0
}

pub const ARTIFACT_FREQ_HZ: f64 = 6.0;
pub const ARTIFACT_SIGMA_MS: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEvent {
    pub time_s: f64,
    pub label: String,
    #[serde(default)]
    pub condition: String,
    pub n170: Option<Template>,
    pub artifact: Option<Artifact>,
}

/// Randomly placed artifacts for a generated paradigm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactPlan {
    pub probability: f64,
    /// Magnitude; the sign is drawn per trial.
    pub amplitude_uv: f64,
    pub channels: Vec<String>,
    #[serde(default = "default_artifact_latency")]
    pub latency_ms: f64,
}

/// Block of fixation / stimulus / blank trials in seeded random order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paradigm {
    pub labels: Vec<String>,
    pub repeats: usize,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<String>,
    #[serde(default = "default_lead_in")]
    pub lead_in_s: f64,
    #[serde(default = "default_fixation")]
    pub fixation_s: f64,
    #[serde(default = "default_jitter")]
    pub jitter_s: f64,
    #[serde(default = "default_one")]
    pub stimulus_s: f64,
    #[serde(default = "default_one")]
    pub blank_s: f64,
    pub n170: Option<Template>,
    pub artifacts: Option<ArtifactPlan>,
}

fn default_conditions() -> Vec<String> {
    vec!["monitor".into()]
}
fn default_lead_in() -> f64 {
    2.0
}
fn default_fixation() -> f64 {
    2.0
}
fn default_jitter() -> f64 {
    0.25
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub sample_rate: f64,
    pub channels: Vec<String>,
    /// Recording length; derived from the last event when absent.
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub noise_uv: f64,
    #[serde(default)]
    pub events: Vec<SynthEvent>,
    pub paradigm: Option<Paradigm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub recording: Recording,
    pub events: EventList,
    /// Indices into `events` that carry an artifact.
    pub artifact_events: Vec<usize>,
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<SynthSpec> {
        toml::from_str(text).map_err(|e| ErpError::InvalidSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth spec serializes")
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ErpError::InvalidSpec(m));
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!("sample_rate {}", self.sample_rate));
        }
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        if !(self.noise_uv >= 0.0 && self.noise_uv.is_finite()) {
            return bad(format!("noise_uv {}", self.noise_uv));
        }
        if let Some(d) = self.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("duration_s {d}"));
            }
        }
        let known = |c: &String| -> Result<()> {
            if self.channels.contains(c) {
                Ok(())
            } else {
                Err(ErpError::UnknownChannel(c.clone()))
            }
        };
        let check_template = |t: &Template| -> Result<()> {
            if !(t.width_ms > 0.0 && t.latency_ms.is_finite() && t.amplitude_uv.is_finite()) {
                return Err(ErpError::InvalidSpec("template width must be positive".into()));
            }
            t.channels.iter().try_for_each(known)
        };
        for e in &self.events {
            if let Some(t) = &e.n170 {
                check_template(t)?;
            }
            if let Some(a) = &e.artifact {
                known(&a.channel)?;
            }
        }
        if let Some(p) = &self.paradigm {
            if p.labels.is_empty() || p.conditions.is_empty() {
                return bad("paradigm needs labels and conditions".into());
            }
            if p.jitter_s < 0.0
                || p.jitter_s > p.fixation_s
                || p.stimulus_s < 0.0
                || p.blank_s < 0.0
                || p.lead_in_s < 0.0
            {
                return bad("paradigm timings must be non-negative, jitter ≤ fixation".into());
            }
            if let Some(t) = &p.n170 {
                check_template(t)?;
            }
            if let Some(a) = &p.artifacts {
                if !(0.0..=1.0).contains(&a.probability) || a.channels.is_empty() {
                    return bad("artifact probability must be in [0, 1] with at least one channel".into());
                }
                a.channels.iter().try_for_each(known)?;
            }
        }
        Ok(())
    }

    /// Fixed events followed by the generated paradigm, sorted by time.
    fn all_events(&self, rng: &mut ChaCha8Rng) -> Vec<SynthEvent> {
        let mut events = self.events.clone();
        if let Some(p) = &self.paradigm {
            let mut trials: Vec<(String, String)> = Vec::new();
            for _ in 0..p.repeats {
                for c in &p.conditions {
                    for l in &p.labels {
                        trials.push((l.clone(), c.clone()));
                    }
                }
            }
            // Fisher-Yates.
            for i in (1..trials.len()).rev() {
                let j = rng.random_range(0..=i);
                trials.swap(i, j);
            }
            let mut t = p.lead_in_s;
            for (label, condition) in trials {
                t += p.fixation_s
                    + if p.jitter_s > 0.0 {
                        rng.random_range(-p.jitter_s..=p.jitter_s)
                    } else {
                        0.0
                    };
                // Onsets fall on the sample grid, like a hardware trigger.
                let onset = (t * self.sample_rate).round() / self.sample_rate;
                let artifact = p.artifacts.as_ref().and_then(|a| {
                    let hit = rng.random_bool(a.probability);
                    let ch = rng.random_range(0..a.channels.len());
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    hit.then(|| Artifact {
                        channel: a.channels[ch].clone(),
                        amplitude_uv: sign * a.amplitude_uv,
                        latency_ms: a.latency_ms,
                    })
                });
                events.push(SynthEvent {
                    time_s: onset,
                    label,
                    condition,
                    n170: p.n170.clone(),
                    artifact,
                });
                t = onset + p.stimulus_s + p.blank_s;
            }
        }
        events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        events
    }
}

fn pink_noise(n: usize, rms: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if rms == 0.0 || n == 0 {
        return vec![0.0; n];
    }
    let mut b = [0.0f64; 7];
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let pink = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            pink
        })
        .collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { rms / var.sqrt() } else { 0.0 };
    for v in &mut out {
        *v = (*v - mean) * scale;
    }
    out
}

/// Adds `f(t - center)` to `x` over `±reach` seconds around `center`.
fn add_shape(x: &mut [f64], rate: f64, center: f64, reach: f64, f: impl Fn(f64) -> f64) {
    let lo = ((center - reach) * rate).floor().max(0.0) as usize;
    let hi = (((center + reach) * rate).ceil() as usize).min(x.len().saturating_sub(1));
    for (i, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
        *v += f(i as f64 / rate - center);
    }
}

pub fn gaussian_deflection(amplitude: f64, sigma_s: f64) -> impl Fn(f64) -> f64 {
    move |dt| amplitude * (-0.5 * (dt / sigma_s).powi(2)).exp()
}

pub fn artifact_burst(amplitude: f64) -> impl Fn(f64) -> f64 {
    let sigma = ARTIFACT_SIGMA_MS / 1000.0;
    move |dt| {
        amplitude * (-0.5 * (dt / sigma).powi(2)).exp() * (2.0 * std::f64::consts::PI * ARTIFACT_FREQ_HZ * dt).cos()
    }
}

/// Generates a recording and its events. Deterministic in `(spec, seed)` and
/// independent of the execution mode.
pub fn synthesize_eeg(spec: &SynthSpec, seed: u64, exec: Execution) -> Result<Synthesis> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = spec.all_events(&mut rng);

    let rate = spec.sample_rate;
    let last = events.last().map_or(0.0, |e| e.time_s);
    let duration = match (spec.duration_s, &spec.paradigm) {
        (Some(d), _) => d,
        (None, Some(p)) => last + p.stimulus_s + p.blank_s + 1.0,
        (None, None) => last + 1.0,
    };
    if last > duration {
        return Err(ErpError::InvalidSpec(format!(
            "event at {last} s is past duration {duration} s"
        )));
    }
    let n = (duration * rate).round() as usize + 1;

    let channels: Vec<usize> = (0..spec.channels.len()).collect();
    let data = exec.map(&channels, |&c| {
        let name = &spec.channels[c];
        let mut ch_rng = ChaCha8Rng::seed_from_u64(seed);
        ch_rng.set_stream(c as u64 + 1);
        let mut x = pink_noise(n, spec.noise_uv, &mut ch_rng);
        for e in &events {
            if let Some(t) = e.n170.as_ref().filter(|t| t.channels.contains(name)) {
                let sigma = t.width_ms / 1000.0;
                add_shape(
                    &mut x,
                    rate,
                    e.time_s + t.latency_ms / 1000.0,
                    6.0 * sigma,
                    gaussian_deflection(t.amplitude_uv, sigma),
                );
            }
            if let Some(a) = e.artifact.as_ref().filter(|a| &a.channel == name) {
                add_shape(
                    &mut x,
                    rate,
                    e.time_s + a.latency_ms / 1000.0,
                    6.0 * ARTIFACT_SIGMA_MS / 1000.0,
                    artifact_burst(a.amplitude_uv),
                );
            }
        }
        x
    });

    let artifact_events = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.artifact.is_some())
        .map(|(i, _)| i)
        .collect();
    let list = EventList::new(
        events
            .into_iter()
            .map(|e| Event {
                time: e.time_s,
                label: e.label,
                condition: e.condition,
            })
            .collect(),
    )?;
    Ok(Synthesis {
        recording: Recording::new(rate, spec.channels.clone(), data)?,
        events: list,
        artifact_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec::from_toml(
            r#"
sample_rate = 256.0
channels = ["Fp1", "Fp2", "P8"]
duration_s = 4.0
noise_uv = 2.0

[[events]]
time_s = 1.0
label = "happy"
condition = "robot"
n170 = { latency_ms = 170.0, amplitude_uv = -5.0, width_ms = 20.0, channels = ["P8"] }
"#,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_recording() {
        let a = synthesize_eeg(&spec(), 3, Execution::Sequential).unwrap();
        let b = synthesize_eeg(&spec(), 3, Execution::default()).unwrap();
        assert_eq!(a, b);
        let c = synthesize_eeg(&spec(), 4, Execution::Sequential).unwrap();
        assert_ne!(a.recording.data, c.recording.data);
    }

    #[test]
    fn noise_rms_matches() {
        let s = synthesize_eeg(
            &SynthSpec {
                events: vec![],
                ..spec()
            },
            1,
            Execution::Sequential,
        )
        .unwrap();
        for ch in &s.recording.data {
            let rms = (ch.iter().map(|v| v * v).sum::<f64>() / ch.len() as f64).sqrt();
            assert!((rms - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_template_peak() {
        let s = synthesize_eeg(
            &SynthSpec {
                noise_uv: 0.0,
                ..spec()
            },
            1,
            Execution::Sequential,
        )
        .unwrap();
        let p8 = &s.recording.data[2];
        let (i, v) = p8.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(i, (1.17f64 * 256.0).round() as usize);
        assert!((v + 5.0).abs() < 0.05);
        assert!(s.recording.data[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn paradigm_counts() {
        let mut sp = spec();
        sp.duration_s = None;
        sp.events.clear();
        sp.paradigm = Some(Paradigm {
            labels: vec!["happy".into(), "sad".into()],
            repeats: 3,
            conditions: vec!["monitor".into(), "robot".into()],
            lead_in_s: 2.0,
            fixation_s: 2.0,
            jitter_s: 0.25,
            stimulus_s: 1.0,
            blank_s: 1.0,
            n170: None,
            artifacts: Some(ArtifactPlan {
                probability: 0.5,
                amplitude_uv: 71.0,
                channels: vec!["Fp1".into()],
                latency_ms: 300.0,
            }),
        });
        let s = synthesize_eeg(&sp, 9, Execution::Sequential).unwrap();
        assert_eq!(s.events.len(), 12);
        assert!(s
            .events
            .events
            .iter()
            .all(|e| (e.time * 256.0 - (e.time * 256.0).round()).abs() < 1e-6));
        s.events.check_within(&s.recording).unwrap();
    }

    #[test]
    fn spec_round_trip_and_errors() {
        let sp = spec();
        assert_eq!(SynthSpec::from_toml(&sp.to_toml()).unwrap(), sp);
        let mut bad = sp.clone();
        bad.events[0].n170.as_mut().unwrap().channels = vec!["Cz".into()];
        assert!(synthesize_eeg(&bad, 0, Execution::Sequential).is_err());
        assert!(SynthSpec::from_toml("sample_rate = 256.0\nchannels = [\"Cz\"]\nbogus = 1\n").is_err());
    }
}
