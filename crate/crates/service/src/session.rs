//! Forced-choice and passive-viewing sessions.
//!
//! A session is a seeded permutation of (emotion × condition × repeat)
//! trials. Each trial runs through
//!
//! ```text
//! pre (gap | fixation | break) ──▶ stimulus ──▶ post (blank) ──▶ response?
//! ```
//!
//! and the runner tells the engine what to show through [`Directive`]s. The
//! runner owns no clock; the caller advances it to [`SessionRunner::next_event_ms`].

use std::fmt::Write as _;

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hybrid_face::render::RenderMode;
use hybrid_face::Emotion;

use crate::engine::Presentation;
use crate::protocol::{ErrorCode, ProtocolError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Expression set at once, no overlay.
    Static,
    /// Transition from neutral, no overlay.
    Animation,
    /// Expression set at once with blinks and twitches.
    Realism,
    /// Transition from neutral with blinks and twitches.
    AnimationRealism,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Static,
        Condition::Animation,
        Condition::Realism,
        Condition::AnimationRealism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Static => "static",
            Condition::Animation => "animation",
            Condition::Realism => "realism",
            Condition::AnimationRealism => "animation_realism",
        }
    }

    fn animated(self) -> bool {
        matches!(self, Condition::Animation | Condition::AnimationRealism)
    }

    fn realism(self) -> bool {
        matches!(self, Condition::Realism | Condition::AnimationRealism)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleStyle {
    /// Neutral gap, 4 s stimulus, forced choice after each stimulus.
    #[default]
    Recognition,
    /// Jittered fixation (blank), 1 s stimulus, 1 s blank.
    MonitorStyle,
    /// 4 s neutral break with blinks, 4 s stimulus, eyes-only rendering.
    MikoStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub emotions: Vec<Emotion>,
    /// Repeats of every (emotion, condition) cell.
    pub repeats: usize,
    pub conditions: Vec<Condition>,
    pub schedule_style: ScheduleStyle,
    /// Stimulus length; the style default when unset.
    pub stimulus_ms: Option<f64>,
    pub fixation_ms: f64,
    /// Uniform fixation jitter, ± ms, rounded to whole ms.
    pub jitter_ms: f64,
    pub blank_ms: f64,
    pub break_ms: f64,
    /// Neutral gap before each recognition trial.
    pub inter_trial_ms: f64,
    /// Transition length in animated conditions.
    pub transition_ms: f64,
    /// Wait for a choice after each stimulus; the style default when unset.
    pub collect_choices: Option<bool>,
    pub order_seed: u64,
    /// Render mode for the session; the style default when unset.
    pub mode: Option<RenderMode>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            emotions: Emotion::BASIS.to_vec(),
            repeats: 1,
            conditions: Condition::ALL.to_vec(),
            schedule_style: ScheduleStyle::Recognition,
            stimulus_ms: None,
            fixation_ms: 2000.0,
            jitter_ms: 250.0,
            blank_ms: 1000.0,
            break_ms: 4000.0,
            inter_trial_ms: 1000.0,
            transition_ms: 500.0,
            collect_choices: None,
            order_seed: 0,
            mode: None,
        }
    }
}

fn bad(message: String) -> ProtocolError {
    ProtocolError::new(ErrorCode::InvalidPayload, message)
}

/// Durations and switches after style defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub stimulus_ms: f64,
    pub pre_ms: f64,
    pub jitter_ms: f64,
    pub pre: Presentation,
    pub post_ms: f64,
    pub collect_choices: bool,
    pub mode: RenderMode,
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<SessionConfig, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.emotions.is_empty() {
            return Err(bad("emotions must not be empty".into()));
        }
        if self.emotions.contains(&Emotion::Neutral) {
            return Err(bad("neutral is not a stimulus emotion".into()));
        }
        if self.repeats == 0 {
            return Err(bad("repeats must be at least 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(bad("at least one condition is required".into()));
        }
        let t = self.timing();
        if !(t.stimulus_ms > 0.0 && t.stimulus_ms.is_finite()) {
            return Err(bad(format!("stimulus_ms {} must be positive", t.stimulus_ms)));
        }
        for (name, v) in [
            ("fixation_ms", self.fixation_ms),
            ("jitter_ms", self.jitter_ms),
            ("blank_ms", self.blank_ms),
            ("break_ms", self.break_ms),
            ("inter_trial_ms", self.inter_trial_ms),
            ("transition_ms", self.transition_ms),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(format!("{name} {v} must be a finite value >= 0")));
            }
        }
        if t.jitter_ms > t.pre_ms {
            return Err(bad(format!(
                "jitter_ms {} exceeds the fixation length {}",
                t.jitter_ms, t.pre_ms
            )));
        }
        if self.transition_ms > t.stimulus_ms {
            return Err(bad(format!(
                "transition_ms {} exceeds stimulus_ms {}",
                self.transition_ms, t.stimulus_ms
            )));
        }
        Ok(())
    }

    pub fn timing(&self) -> Timing {
        match self.schedule_style {
            ScheduleStyle::Recognition => Timing {
                stimulus_ms: self.stimulus_ms.unwrap_or(4000.0),
                pre_ms: self.inter_trial_ms,
                jitter_ms: 0.0,
                pre: Presentation::default(),
                post_ms: 0.0,
                collect_choices: self.collect_choices.unwrap_or(true),
                mode: self.mode.unwrap_or(RenderMode::HybridFull),
            },
            ScheduleStyle::MonitorStyle => Timing {
                stimulus_ms: self.stimulus_ms.unwrap_or(1000.0),
                pre_ms: self.fixation_ms,
                jitter_ms: self.jitter_ms,
                pre: Presentation {
                    blank: true,
                    ..Default::default()
                },
                post_ms: self.blank_ms,
                collect_choices: self.collect_choices.unwrap_or(false),
                mode: self.mode.unwrap_or(RenderMode::HybridFull),
            },
            ScheduleStyle::MikoStyle => Timing {
                stimulus_ms: self.stimulus_ms.unwrap_or(4000.0),
                pre_ms: self.break_ms,
                jitter_ms: 0.0,
                pre: Presentation {
                    realism: true,
                    ..Default::default()
                },
                post_ms: 0.0,
                collect_choices: self.collect_choices.unwrap_or(false),
                mode: self.mode.unwrap_or(RenderMode::EyesOnly),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub sequence: usize,
    pub emotion: Emotion,
    pub condition: Condition,
    pub repeat: usize,
    /// Gap, fixation or break before the stimulus, ms.
    pub pre_ms: f64,
}

/// Seeded permutation of every (emotion, condition, repeat) cell.
pub fn build_schedule(config: &SessionConfig) -> Vec<Trial> {
    let timing = config.timing();
    let mut cells = Vec::with_capacity(config.emotions.len() * config.conditions.len() * config.repeats);
    for &e in &config.emotions {
        for &c in &config.conditions {
            for r in 0..config.repeats {
                cells.push((e, c, r));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.order_seed);
    cells.shuffle(&mut rng);
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(config.order_seed);
    jitter_rng.set_stream(1);
    cells
        .into_iter()
        .enumerate()
        .map(|(sequence, (emotion, condition, repeat))| {
            let j = if timing.jitter_ms > 0.0 {
                jitter_rng.random_range(-timing.jitter_ms..=timing.jitter_ms).round()
            } else {
                0.0
            };
            Trial {
                sequence,
                emotion,
                condition,
                repeat,
                pre_ms: timing.pre_ms + j,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetLogEntry {
    pub sequence: usize,
    /// Service clock, ms.
    pub monotonic_ms: f64,
    /// Time since session start, ms.
    pub session_ms: f64,
    pub wall_clock: String,
    pub label: Emotion,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub sequence: usize,
    pub participant_id: String,
    pub shown: Emotion,
    pub chosen: Emotion,
    pub condition: Condition,
    /// From the prompt to the answer, ms.
    pub response_ms: f64,
}

/// Shown × chosen counts over the eight basis emotions.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 8]; 8],
}

impl ConfusionMatrix {
    pub fn add(&mut self, shown: Emotion, chosen: Emotion) {
        if let (Some(i), Some(j)) = (shown.basis_index(), chosen.basis_index()) {
            self.counts[i][j] += 1;
        }
    }

    pub fn row_total(&self, shown: Emotion) -> u64 {
        shown.basis_index().map_or(0, |i| self.counts[i].iter().sum())
    }

    /// Row-normalized percentages; `None` for an empty row.
    pub fn percent_row(&self, shown: Emotion) -> Option<[f64; 8]> {
        let i = shown.basis_index()?;
        let total = self.row_total(shown);
        if total == 0 {
            return None;
        }
        Some(self.counts[i].map(|c| 100.0 * c as f64 / total as f64))
    }

    pub fn percent(&self, shown: Emotion, chosen: Emotion) -> Option<f64> {
        Some(self.percent_row(shown)?[chosen.basis_index()?])
    }

    fn header(last: Option<&str>) -> String {
        let mut out = String::from("shown");
        for e in Emotion::BASIS {
            out.push(',');
            out.push_str(e.name());
        }
        if let Some(l) = last {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        out
    }

    /// Rows with at least one answer, basis order.
    pub fn counts_csv(&self) -> String {
        let mut out = Self::header(Some("total"));
        for e in Emotion::BASIS {
            let total = self.row_total(e);
            if total == 0 {
                continue;
            }
            out.push_str(e.name());
            for c in self.counts[e.basis_index().unwrap_or(0)] {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out, ",{total}");
        }
        out
    }

    pub fn percent_csv(&self) -> String {
        let mut out = Self::header(None);
        for e in Emotion::BASIS {
            if let Some(row) = self.percent_row(e) {
                out.push_str(e.name());
                for p in row {
                    let _ = write!(out, ",{p:.6}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// What the engine should do next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Directive {
    /// Neutral face (or blank) between stimuli.
    Neutral { presentation: Presentation },
    Show {
        emotion: Emotion,
        transition_ms: f64,
        presentation: Presentation,
    },
    /// A choice is expected for this trial.
    Prompt { sequence: usize },
    /// Session over; engine returns to its own defaults.
    Finished { aborted: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Waiting for the next whole millisecond before a trial starts.
    Between,
    Pre,
    Stimulus,
    Post,
    Response,
    Done,
}

/// Everything a finished or aborted session leaves behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub config: SessionConfig,
    pub schedule: Vec<Trial>,
    pub onsets: Vec<OnsetLogEntry>,
    pub choices: Vec<ChoiceRecord>,
    pub confusion: ConfusionMatrix,
    pub aborted: bool,
    pub start_ms: f64,
    pub end_ms: Option<f64>,
    pub wall_start: String,
}

pub const WALL_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

#[derive(Debug, Clone)]
pub struct SessionRunner {
    config: SessionConfig,
    timing: Timing,
    schedule: Vec<Trial>,
    start_ms: f64,
    wall_start: DateTime<Utc>,
    current: usize,
    phase: Phase,
    phase_end: Option<f64>,
    prompt_ms: f64,
    onsets: Vec<OnsetLogEntry>,
    choices: Vec<ChoiceRecord>,
    confusion: ConfusionMatrix,
    aborted: bool,
    end_ms: Option<f64>,
}

impl SessionRunner {
    /// Creates a runner whose first trial begins at `start_ms`, rounded up
    /// to a whole millisecond so onsets stay exact in decimal exports.
    pub fn start(
        config: SessionConfig,
        start_ms: f64,
        wall_start: DateTime<Utc>,
    ) -> Result<SessionRunner, ProtocolError> {
        config.validate()?;
        let timing = config.timing();
        let schedule = build_schedule(&config);
        let start_ms = start_ms.ceil();
        Ok(SessionRunner {
            config,
            timing,
            schedule,
            start_ms,
            wall_start,
            current: 0,
            phase: Phase::Between,
            phase_end: Some(start_ms),
            prompt_ms: start_ms,
            onsets: Vec::new(),
            choices: Vec::new(),
            confusion: ConfusionMatrix::default(),
            aborted: false,
            end_ms: None,
        })
    }

    pub fn start_ms(&self) -> f64 {
        self.start_ms
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn timing(&self) -> &Timing {
        &self.timing
    }

    pub fn schedule(&self) -> &[Trial] {
        &self.schedule
    }

    pub fn onsets(&self) -> &[OnsetLogEntry] {
        &self.onsets
    }

    pub fn confusion(&self) -> &ConfusionMatrix {
        &self.confusion
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Done
    }

    /// Prompt time and trial when a choice is pending.
    pub fn awaiting_choice(&self) -> Option<(f64, &Trial)> {
        (self.phase == Phase::Response).then(|| (self.prompt_ms, &self.schedule[self.current]))
    }

    /// Time of the next timed phase change.
    pub fn next_event_ms(&self) -> Option<f64> {
        self.phase_end
    }

    fn enter_trial(&mut self, t: f64, out: &mut Vec<Directive>) {
        let Some(trial) = self.schedule.get(self.current).copied() else {
            self.finish(t, out);
            return;
        };
        if trial.pre_ms > 0.0 {
            self.phase = Phase::Pre;
            self.phase_end = Some(t + trial.pre_ms);
            out.push(Directive::Neutral {
                presentation: self.timing.pre,
            });
        } else {
            self.enter_stimulus(t, out);
        }
    }

    fn enter_stimulus(&mut self, t: f64, out: &mut Vec<Directive>) {
        let trial = self.schedule[self.current];
        let session_ms = t - self.start_ms;
        let wall = self.wall_start + Duration::microseconds((session_ms * 1000.0).round() as i64);
        self.onsets.push(OnsetLogEntry {
            sequence: trial.sequence,
            monotonic_ms: t,
            session_ms,
            wall_clock: wall.format(WALL_FORMAT).to_string(),
            label: trial.emotion,
            condition: trial.condition,
        });
        self.phase = Phase::Stimulus;
        self.phase_end = Some(t + self.timing.stimulus_ms);
        let c = trial.condition;
        out.push(Directive::Show {
            emotion: trial.emotion,
            transition_ms: if c.animated() { self.config.transition_ms } else { 0.0 },
            presentation: Presentation {
                blank: false,
                realism: c.realism(),
                suppress_blinks: false,
            },
        });
    }

    fn after_stimulus(&mut self, t: f64, out: &mut Vec<Directive>) {
        if self.timing.collect_choices {
            self.phase = Phase::Response;
            self.phase_end = None;
            self.prompt_ms = t;
            out.push(Directive::Neutral {
                presentation: Presentation::default(),
            });
            out.push(Directive::Prompt { sequence: self.current });
        } else {
            self.current += 1;
            self.enter_trial(t, out);
        }
    }

    fn finish(&mut self, t: f64, out: &mut Vec<Directive>) {
        self.phase = Phase::Done;
        self.phase_end = None;
        self.end_ms = Some(t);
        out.push(Directive::Neutral {
            presentation: Presentation::default(),
        });
        out.push(Directive::Finished { aborted: self.aborted });
    }

    /// Performs the phase change due at [`Self::next_event_ms`]. `t` must be
    /// that time.
    pub fn advance(&mut self, t: f64) -> Vec<Directive> {
        let mut out = Vec::new();
        match self.phase {
            Phase::Between => self.enter_trial(t, &mut out),
            Phase::Pre => self.enter_stimulus(t, &mut out),
            Phase::Stimulus if self.timing.post_ms > 0.0 => {
                self.phase = Phase::Post;
                self.phase_end = Some(t + self.timing.post_ms);
                out.push(Directive::Neutral {
                    presentation: Presentation {
                        blank: true,
                        ..Default::default()
                    },
                });
            }
            Phase::Stimulus | Phase::Post => self.after_stimulus(t, &mut out),
            Phase::Response | Phase::Done => {}
        }
        out
    }

    /// Records a forced choice. Anything but the eight emotions is rejected
    /// and the prompt is repeated.
    pub fn choice(&mut self, t: f64, participant_id: &str, chosen: &str) -> Result<Vec<Directive>, ProtocolError> {
        if self.phase != Phase::Response {
            return Err(ProtocolError::new(ErrorCode::NoSession, "no choice is pending"));
        }
        let chosen_emotion = chosen
            .parse::<Emotion>()
            .ok()
            .filter(|e| e.basis_index().is_some())
            .ok_or_else(|| {
                ProtocolError::new(
                    ErrorCode::InvalidChoice,
                    format!("{chosen:?} is not one of the eight emotions; choose again"),
                )
            })?;
        let trial = self.schedule[self.current];
        self.confusion.add(trial.emotion, chosen_emotion);
        self.choices.push(ChoiceRecord {
            sequence: trial.sequence,
            participant_id: participant_id.to_string(),
            shown: trial.emotion,
            chosen: chosen_emotion,
            condition: trial.condition,
            response_ms: t - self.prompt_ms,
        });
        self.current += 1;
        self.phase = Phase::Between;
        self.phase_end = Some(t.ceil());
        Ok(vec![Directive::Neutral {
            presentation: Presentation::default(),
        }])
    }

    pub fn abort(&mut self, t: f64) -> Vec<Directive> {
        let mut out = Vec::new();
        if self.phase != Phase::Done {
            self.aborted = true;
            self.finish(t, &mut out);
        }
        out
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            config: self.config.clone(),
            schedule: self.schedule.clone(),
            onsets: self.onsets.clone(),
            choices: self.choices.clone(),
            confusion: self.confusion.clone(),
            aborted: self.aborted,
            start_ms: self.start_ms,
            end_ms: self.end_ms,
            wall_start: self.wall_start.format(WALL_FORMAT).to_string(),
        }
    }
}

/// Reference recognition rates (%) from a forced-choice study with the
/// hybrid face; rows shown, columns chosen, basis order.
pub const REFERENCE_CONFUSION: [[f64; 8]; 8] = [
    [84.8, 1.3, 2.7, 1.3, 4.6, 4.0, 1.3, 0.0],
    [1.5, 88.8, 0.6, 3.9, 1.3, 0.6, 2.0, 1.3],
    [3.3, 2.7, 68.5, 3.3, 0.6, 0.6, 21.0, 0.0],
    [2.0, 28.2, 2.6, 50.0, 9.9, 3.3, 2.0, 2.0],
    [2.7, 2.0, 1.3, 9.2, 79.6, 3.2, 2.0, 0.0],
    [0.0, 3.2, 6.6, 4.0, 2.0, 69.0, 14.5, 0.7],
    [0.0, 6.0, 10.7, 0.7, 4.0, 14.0, 59.2, 5.4],
    [4.6, 4.6, 0.0, 0.0, 15.8, 6.6, 4.6, 63.8],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponderKind {
    /// Answers drawn from `rows` (or the reference table).
    #[default]
    Table,
    /// Always the shown emotion.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponderConfig {
    pub kind: ResponderKind,
    /// 8 × 8 answer rates, rows shown, columns chosen. Rows are normalized.
    pub rows: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub participant_id: String,
    /// Time from prompt to answer, ms.
    pub latency_ms: f64,
}

impl Default for ResponderConfig {
    fn default() -> Self {
        ResponderConfig {
            kind: ResponderKind::Table,
            rows: None,
            seed: 0,
            participant_id: "scripted".into(),
            latency_ms: 1200.0,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Deterministic participant stand-in.
///
/// Answers for the `n`-th showing of an emotion come from the golden-ratio
/// sequence `frac(offset + n / φ)` mapped through the row's cumulative
/// distribution, so answer frequencies track the table closely even over a
/// few dozen trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedResponder {
    cdf: [[f64; 8]; 8],
    offsets: [f64; 8],
    shown: [u64; 8],
}

impl ScriptedResponder {
    pub fn new(config: &ResponderConfig) -> Result<ScriptedResponder, ProtocolError> {
        let rows: [[f64; 8]; 8] = match (config.kind, &config.rows) {
            (ResponderKind::Oracle, _) => {
                std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
            }
            (ResponderKind::Table, None) => REFERENCE_CONFUSION,
            (ResponderKind::Table, Some(rows)) => {
                if rows.len() != 8 || rows.iter().any(|r| r.len() != 8) {
                    return Err(bad("responder rows must be 8 × 8".into()));
                }
                std::array::from_fn(|i| std::array::from_fn(|j| rows[i][j]))
            }
        };
        let mut cdf = [[0.0; 8]; 8];
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(bad(format!("responder row {i} has a negative or non-finite rate")));
            }
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                return Err(bad(format!("responder row {i} is all zero")));
            }
            let mut acc = 0.0;
            for j in 0..8 {
                acc += row[j] / total;
                cdf[i][j] = acc;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let offsets = std::array::from_fn(|_| rng.random::<f64>());
        Ok(ScriptedResponder {
            cdf,
            offsets,
            shown: [0; 8],
        })
    }

    pub fn respond(&mut self, shown: Emotion) -> Emotion {
        let Some(i) = shown.basis_index() else {
            return shown;
        };
        self.shown[i] += 1;
        let u = (self.offsets[i] + self.shown[i] as f64 * INV_PHI).fract();
        let row = &self.cdf[i];
        let j = row.iter().position(|&c| u < c).unwrap_or_else(|| {
            // u landed above a cumulative total rounded below 1; take the last non-empty column.
            (0..8).rev().find(|&j| j == 0 || row[j] > row[j - 1]).unwrap_or(0)
        });
        Emotion::BASIS[j]
    }
}
