//! Synthetic recordings through the whole pipeline.

use std::f64::consts::PI;

use erp_lab::synth::{ArtifactPlan, Paradigm, Template};
use erp_lab::{
    baseline_correct, channel_table, epoch, grand_average, quantize_onsets, reject_artifacts, run_pipeline,
    synthesize_eeg, AverageMode, EpochWindow, ErpWaveform, Event, EventList, Execution, GroupBy, PipelineConfig,
    SynthSpec,
};
use proptest::prelude::*;

const FS: f64 = 256.0;

/// Peak of a zero-phase-filtered Gaussian relative to its raw peak: the
/// Gaussian's spectrum weighted by |H|² of each band, integrated numerically.
fn predicted_attenuation(sigma_s: f64, bands: &[(f64, f64)]) -> f64 {
    let warp = |f: f64| 2.0 * FS * (PI * f / FS).tan();
    let gain2 = |f: f64, (lo, hi): (f64, f64)| {
        let (w, wl, wh) = (warp(f), warp(lo), warp(hi));
        let x = (w * w - wl * wh) / (w * (wh - wl));
        1.0 / (1.0 + x.powi(8))
    };
    let df = 1e-3;
    let (mut num, mut den) = (0.0, 0.0);
    let mut f = df / 2.0;
    while f < FS / 2.0 {
        let g = (-2.0 * (PI * sigma_s * f).powi(2)).exp();
        num += g * bands.iter().map(|&b| gain2(f, b)).product::<f64>();
        den += g;
        f += df;
    }
    num / den
}

fn single_event_spec(noise_uv: f64) -> SynthSpec {
    SynthSpec::from_toml(&format!(
        r#"
sample_rate = 256.0
channels = ["Fp1", "Fp2", "P8", "O2"]
duration_s = 30.0
noise_uv = {noise_uv}

[[events]]
time_s = 15.0
label = "happy"
condition = "robot"
n170 = {{ latency_ms = 170.0, amplitude_uv = -5.0, width_ms = 25.0, channels = ["P8", "O2"] }}
"#
    ))
    .unwrap()
}

#[test]
fn noiseless_single_event_recovery() {
    let s = synthesize_eeg(&single_event_spec(0.0), 1, Execution::Sequential).unwrap();
    let out = run_pipeline(&s.recording, &s.events, &PipelineConfig::default()).unwrap();
    let expected = -5.0 * predicted_attenuation(0.025, &[(0.1, 20.0), (1.0, 5.0)]);
    for (_, ms) in &out.measures {
        for m in ms.iter().filter(|m| m.channel == "P8" || m.channel == "O2") {
            assert!((m.latency_ms - 170.0).abs() <= 4.0, "{m:?}");
            assert!(
                ((m.amplitude - expected) / expected).abs() <= 0.2,
                "{} vs {expected}",
                m.amplitude
            );
        }
    }
}

#[test]
fn zero_events_give_empty_sets() {
    let mut spec = single_event_spec(1.0);
    spec.events.clear();
    let s = synthesize_eeg(&spec, 2, Execution::Sequential).unwrap();
    assert!(s.events.is_empty());
    let set = epoch(
        &s.recording,
        &s.events,
        EpochWindow::from_ms(100.0, 400.0, FS).unwrap(),
        "s",
    );
    assert!(set.epochs.is_empty() && set.skipped.is_empty());
    let set = reject_artifacts(&set, 70.0, &["Fp1".into()], Execution::Sequential).unwrap();
    assert!(set.epochs.is_empty());
    let out = run_pipeline(&s.recording, &s.events, &PipelineConfig::default()).unwrap();
    assert!(out.average.waveforms.is_empty());
}

fn paradigm_spec(artifact_probability: f64) -> SynthSpec {
    SynthSpec {
        sample_rate: FS,
        channels: ["Fp1", "Fp2", "P7", "P8", "O1", "O2"].map(String::from).to_vec(),
        duration_s: None,
        noise_uv: 0.5,
        events: vec![],
        paradigm: Some(Paradigm {
            labels: vec!["happy".into(), "sad".into(), "angry".into()],
            repeats: 6,
            conditions: vec!["monitor".into(), "robot".into()],
            lead_in_s: 2.0,
            fixation_s: 2.0,
            jitter_s: 0.25,
            stimulus_s: 1.0,
            blank_s: 1.0,
            n170: Some(Template {
                latency_ms: 170.0,
                amplitude_uv: -5.0,
                width_ms: 25.0,
                channels: vec!["P7".into(), "P8".into(), "O1".into(), "O2".into()],
            }),
            artifacts: Some(ArtifactPlan {
                probability: artifact_probability,
                amplitude_uv: 71.0,
                channels: vec!["Fp1".into(), "Fp2".into()],
                latency_ms: 300.0,
            }),
        }),
    }
}

#[test]
fn sequential_and_parallel_pipelines_identical() {
    let s = synthesize_eeg(&paradigm_spec(0.2), 5, Execution::Sequential).unwrap();
    let seq = PipelineConfig {
        execution: Execution::Sequential,
        ..Default::default()
    };
    let par = PipelineConfig {
        execution: Execution::Parallel,
        ..Default::default()
    };
    let a = run_pipeline(&s.recording, &s.events, &seq).unwrap();
    let b = run_pipeline(&s.recording, &s.events, &par).unwrap();
    assert_eq!(a, b);
    assert!(a.anova.is_some());
    assert_eq!(a.deltas.len(), 3);
}

#[test]
fn rejection_matches_injected_artifacts() {
    let s = synthesize_eeg(&paradigm_spec(0.3), 8, Execution::default()).unwrap();
    let out = run_pipeline(&s.recording, &s.events, &PipelineConfig::default()).unwrap();
    let rejected: Vec<usize> = out
        .epochs
        .epochs
        .iter()
        .filter(|e| !e.is_kept())
        .map(|e| e.event_index)
        .collect();
    assert!(!rejected.is_empty());
    assert_eq!(rejected, s.artifact_events);
}

#[test]
fn counts_conserved_per_label() {
    let mut s = synthesize_eeg(&paradigm_spec(0.3), 4, Execution::default()).unwrap();
    // One event too close to the start to have a full window.
    s.events.events.insert(
        0,
        Event {
            time: 0.05,
            label: "happy".into(),
            condition: "robot".into(),
        },
    );
    let out = run_pipeline(&s.recording, &s.events, &PipelineConfig::default()).unwrap();
    for (label, c) in &out.report.per_label {
        let events = s.events.events.iter().filter(|e| &e.label == label).count();
        assert_eq!(c.events, events);
        assert_eq!(c.kept + c.rejected + c.skipped, events);
    }
    assert_eq!(out.report.per_label["happy"].skipped, 1);
}

#[test]
fn scaling_is_linear() {
    let s = synthesize_eeg(&paradigm_spec(0.0), 6, Execution::default()).unwrap();
    let cfg = PipelineConfig {
        reject_uv: f64::INFINITY,
        ..Default::default()
    };
    let base = run_pipeline(&s.recording, &s.events, &cfg).unwrap();
    for c in [0.5, 2.0, 3.7] {
        let scaled = run_pipeline(&s.recording.scaled(c), &s.events, &cfg).unwrap();
        for (w, v) in base.average.waveforms.iter().zip(&scaled.average.waveforms) {
            for (a, b) in w.data.iter().flatten().zip(v.data.iter().flatten()) {
                assert!((c * a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
        for ((_, ma), (_, mb)) in base.measures.iter().zip(&scaled.measures) {
            for (a, b) in ma.iter().zip(mb) {
                assert_eq!(a.latency_ms, b.latency_ms);
            }
        }
    }
}

#[test]
fn table_from_saved_waveforms_identical() {
    let s = synthesize_eeg(&paradigm_spec(0.0), 7, Execution::default()).unwrap();
    let out = run_pipeline(&s.recording, &s.events, &PipelineConfig::default()).unwrap();
    let opts = PipelineConfig::default().n170_options();
    let reloaded: Vec<ErpWaveform> = out
        .average
        .waveforms
        .iter()
        .map(|w| ErpWaveform::from_csv(&w.label, &w.to_csv(), FS).unwrap())
        .collect();
    let again = channel_table(&reloaded, &opts).unwrap();
    assert_eq!(again.amplitude_csv(), out.table.amplitude_csv());
    assert_eq!(again.channels, s.recording.channels);
}

#[test]
fn outputs_written() {
    let s = synthesize_eeg(&paradigm_spec(0.2), 3, Execution::default()).unwrap();
    let out = run_pipeline(&s.recording, &s.events, &PipelineConfig::default()).unwrap();
    let dir = std::env::temp_dir().join(format!("erp-out-{}", std::process::id()));
    out.write(&dir).unwrap();
    for f in [
        "n170.csv",
        "n170_channels.csv",
        "rejection.csv",
        "anova.csv",
        "waveform_happy.csv",
        "condition_deltas.csv",
    ] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let table = std::fs::read_to_string(dir.join("n170_channels.csv")).unwrap();
    assert!(table.starts_with("channel,angry,happy,sad\nFp1,"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn subject_weighted_average_fixture() {
    let rec_a = synthesize_eeg(&single_event_spec(3.0), 1, Execution::default()).unwrap();
    let rec_b = synthesize_eeg(&single_event_spec(3.0), 2, Execution::default()).unwrap();
    let w = EpochWindow::from_ms(100.0, 400.0, FS).unwrap();
    let mut two = rec_a.events.clone();
    two.events.push(Event {
        time: 20.0,
        ..two.events[0].clone()
    });
    let a = baseline_correct(&epoch(&rec_a.recording, &two, w, "a"), Execution::Sequential);
    let b = baseline_correct(&epoch(&rec_b.recording, &rec_b.events, w, "b"), Execution::Sequential);
    let ga = grand_average(
        &[a.clone(), b.clone()],
        GroupBy::Label,
        AverageMode::SubjectsThenGrand,
        Execution::Parallel,
    )
    .unwrap();
    // Brute force over the three epochs: mean(mean(a0, a1), b0).
    for c in 0..4 {
        for i in 0..w.len() {
            let want = ((a.epochs[0].data[c][i] + a.epochs[1].data[c][i]) / 2.0 + b.epochs[0].data[c][i]) / 2.0;
            assert!((ga.waveforms[0].data[c][i] - want).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantization_error_below_one_frame(times in prop::collection::vec(0.0..3600.0f64, 1..50)) {
        let mut times = times;
        times.sort_by(f64::total_cmp);
        let list = EventList::new(times.iter().map(|&t| Event { time: t, label: "x".into(), condition: String::new() }).collect()).unwrap();
        let q = quantize_onsets(&list, 26.0).unwrap();
        for (a, b) in list.events.iter().zip(&q.events) {
            let err = a.time - b.time;
            prop_assert!((0.0..1.0 / 26.0).contains(&err), "{} -> {}", a.time, b.time);
        }
    }

    #[test]
    fn lower_threshold_never_unrejects(t_hi in 1.0..100.0f64, frac in 0.0..1.0f64) {
        let s = synthesize_eeg(&paradigm_spec(0.3), 11, Execution::default()).unwrap();
        let set = epoch(&s.recording, &s.events, EpochWindow::from_ms(100.0, 400.0, FS).unwrap(), "s");
        let chans = vec!["Fp1".to_string(), "Fp2".to_string()];
        let hi = reject_artifacts(&set, t_hi, &chans, Execution::Sequential).unwrap();
        let lo = reject_artifacts(&set, t_hi * frac, &chans, Execution::Sequential).unwrap();
        for (a, b) in hi.epochs.iter().zip(&lo.epochs) {
            prop_assert!(a.is_kept() || !b.is_kept());
        }
    }
}
