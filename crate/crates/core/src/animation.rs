//! Time-domain behavior: expression transitions, realism overlays and the
//! pupil-dilation model.
//!
//! Everything here is a pure function of its inputs. Callers own the clock
//! and pass times in explicitly; stochastic behavior (blinks, twitches) is
//! derived from a seed, so the same `(state, t, seed)` always yields the
//! same output.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::AnimationError;
use crate::face::{clamp, Dof, Emotion, FaceState, DOF_COUNT};
use crate::hash;

/// Default transition length for animated expression changes.
pub const DEFAULT_TRANSITION_MS: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Easing {
    Linear,
    #[default]
    Smoothstep,
}

impl Easing {
    /// Maps normalized time in `[0, 1]` to interpolation progress in `[0, 1]`.
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Easing::Linear => s,
            Easing::Smoothstep => s * s * (3.0 - 2.0 * s),
        }
    }
}

/// A transition between two face states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub start_state: FaceState,
    pub end_state: FaceState,
    pub duration_ms: f64,
    pub easing: Easing,
}

impl Timeline {
    pub fn new(
        start_state: FaceState,
        end_state: FaceState,
        duration_ms: f64,
        easing: Easing,
    ) -> Result<Timeline, AnimationError> {
        if !(duration_ms > 0.0 && duration_ms.is_finite()) {
            return Err(AnimationError::InvalidDuration(duration_ms));
        }
        Ok(Timeline {
            start_state,
            end_state,
            duration_ms,
            easing,
        })
    }

    /// Samples the transition at `t_ms`; see [`sample_transition`].
    pub fn sample(&self, t_ms: f64) -> Result<FaceState, AnimationError> {
        sample_transition(self, t_ms)
    }
}

/// Component-wise interpolation from start to end.
///
/// Endpoints are reproduced exactly and every component stays between its
/// start and end values.
pub fn sample_transition(timeline: &Timeline, t_ms: f64) -> Result<FaceState, AnimationError> {
    let d = timeline.duration_ms;
    if !(0.0..=d).contains(&t_ms) {
        return Err(AnimationError::TimeOutOfRange { t: t_ms, duration: d });
    }
    if t_ms == d {
        return Ok(timeline.end_state);
    }
    let s = timeline.easing.apply(t_ms / d);
    let a = timeline.start_state.to_array();
    let b = timeline.end_state.to_array();
    let mut out = [0.0; DOF_COUNT];
    for i in 0..DOF_COUNT {
        let v = a[i] + (b[i] - a[i]) * s;
        out[i] = v.clamp(a[i].min(b[i]), a[i].max(b[i]));
    }
    Ok(clamp(out)?)
}

/// Parameters for blinks, brow twitches and eye micro-motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealismConfig {
    /// Mean gap between blinks, seconds. `inf` disables blinking.
    pub blink_mean_interval: f64,
    pub blink_duration_ms: f64,
    pub twitch_amplitude: f64,
    pub micromotion_amplitude: f64,
    pub micromotion_period: f64,
    pub rng_seed: u64,
}

/// Upper bound on twitch and micro-motion amplitudes.
pub const MAX_SUBTLE_AMPLITUDE: f64 = 0.1;

impl Default for RealismConfig {
    fn default() -> Self {
        RealismConfig {
            blink_mean_interval: 4.0,
            blink_duration_ms: 200.0,
            twitch_amplitude: 0.02,
            micromotion_amplitude: 0.03,
            micromotion_period: 2.0,
            rng_seed: 0,
        }
    }
}

// Blink onsets are generated per fixed block so any instant can be
// evaluated without replaying the whole history.
const BLINK_BLOCK_S: f64 = 16.0;
const TWITCH_KNOT_S: f64 = 0.35;

const STREAM_BLINK: u64 = 1;
const STREAM_TWITCH: u64 = 2;
const STREAM_MICRO: u64 = 3;

impl RealismConfig {
    /// Overlay that leaves every state untouched.
    pub fn null() -> RealismConfig {
        RealismConfig {
            blink_mean_interval: f64::INFINITY,
            blink_duration_ms: 0.0,
            twitch_amplitude: 0.0,
            micromotion_amplitude: 0.0,
            micromotion_period: 1.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AnimationError> {
        let bad = |m: &str| Err(AnimationError::InvalidConfig(m.to_string()));
        if self.blink_mean_interval.is_nan() || self.blink_mean_interval <= 0.0 {
            return bad("blink_mean_interval must be positive");
        }
        if !(self.blink_duration_ms >= 0.0 && self.blink_duration_ms <= BLINK_BLOCK_S * 1000.0) {
            return bad("blink_duration_ms must be in [0, 16000]");
        }
        for (name, a) in [
            ("twitch_amplitude", self.twitch_amplitude),
            ("micromotion_amplitude", self.micromotion_amplitude),
        ] {
            if !(0.0..=MAX_SUBTLE_AMPLITUDE).contains(&a) {
                return Err(AnimationError::InvalidConfig(format!(
                    "{name} must be in [0, {MAX_SUBTLE_AMPLITUDE}]"
                )));
            }
        }
        if !(self.micromotion_period > 0.0 && self.micromotion_period.is_finite()) {
            return bad("micromotion_period must be positive");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<RealismConfig, AnimationError> {
        let cfg: RealismConfig = toml::from_str(text).map_err(|e| AnimationError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serializes")
    }

    fn blinks_enabled(&self) -> bool {
        self.blink_mean_interval.is_finite() && self.blink_duration_ms > 0.0
    }

    fn block_onsets(&self, block: i64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(hash::mix(self.rng_seed, STREAM_BLINK, block));
        let lambda = BLINK_BLOCK_S / self.blink_mean_interval;
        let count = Poisson::new(lambda).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
        let start = block as f64 * BLINK_BLOCK_S;
        let mut onsets: Vec<f64> = (0..count)
            .map(|_| start + rng.random::<f64>() * BLINK_BLOCK_S)
            .collect();
        onsets.sort_by(f64::total_cmp);
        onsets
    }

    /// Blink onset times (seconds) in `[from, to)`, ascending.
    ///
    /// Onsets form a homogeneous Poisson process, so gaps are exponential
    /// with mean `blink_mean_interval`.
    pub fn blink_onsets(&self, from: f64, to: f64) -> Vec<f64> {
        if !self.blink_mean_interval.is_finite() || to <= from {
            return Vec::new();
        }
        let first = (from / BLINK_BLOCK_S).floor() as i64;
        let last = (to / BLINK_BLOCK_S).floor() as i64;
        (first..=last)
            .flat_map(|b| self.block_onsets(b))
            .filter(|&t| t >= from && t < to)
            .collect()
    }

    /// Lid closure in `[0, 1]` at time `t` (1 = fully shut).
    pub fn blink_closure(&self, t: f64) -> f64 {
        if !self.blinks_enabled() {
            return 0.0;
        }
        let d = self.blink_duration_ms / 1000.0;
        let block = (t / BLINK_BLOCK_S).floor() as i64;
        let mut closure: f64 = 0.0;
        for b in [block - 1, block] {
            for onset in self.block_onsets(b) {
                let tau = t - onset;
                if (0.0..d).contains(&tau) {
                    closure = closure.max(0.5 * (1.0 - (2.0 * PI * tau / d).cos()));
                }
            }
        }
        closure
    }

    /// Smooth jitter in `[-1, 1]` for one brow DoF.
    fn twitch(&self, dof: Dof, t: f64) -> f64 {
        let x = t / TWITCH_KNOT_S;
        let k = x.floor();
        let frac = x - k;
        let stream = STREAM_TWITCH + 16 * dof.index() as u64;
        let knot = |i: i64| 2.0 * hash::unit(self.rng_seed, stream, i) - 1.0;
        let a = knot(k as i64);
        let b = knot(k as i64 + 1);
        let s = Easing::Smoothstep.apply(frac);
        (a + (b - a) * s).clamp(-1.0, 1.0)
    }

    fn micromotion_phase(&self, dof: Dof) -> f64 {
        2.0 * PI * hash::unit(self.rng_seed, STREAM_MICRO, dof.index() as i64)
    }
}

/// Applies blinks, brow twitches and eye drift to `base` at time `t` seconds.
///
/// Lids are driven to zero and back during each blink; the four brow DoF get
/// bounded jitter of at most `twitch_amplitude`; eye pitch and yaw drift
/// periodically within `micromotion_amplitude`. All other DoF are untouched
/// and the result is clipped to the DoF intervals.
pub fn realism_overlay(base: &FaceState, t: f64, config: &RealismConfig) -> FaceState {
    let mut v = base.to_array();
    let open = 1.0 - config.blink_closure(t);
    for dof in [Dof::LidOpenLeft, Dof::LidOpenRight] {
        v[dof.index()] *= open;
    }
    if config.twitch_amplitude > 0.0 {
        for dof in Dof::ALL.into_iter().filter(|d| d.is_brow()) {
            v[dof.index()] += config.twitch_amplitude * config.twitch(dof, t);
        }
    }
    if config.micromotion_amplitude > 0.0 {
        let w = 2.0 * PI * t / config.micromotion_period;
        for dof in [Dof::EyePitch, Dof::EyeYaw] {
            v[dof.index()] += config.micromotion_amplitude * (w + config.micromotion_phase(dof)).sin();
        }
    }
    clamp(v).expect("finite overlay")
}

/// Physical pupil-dilation parameters, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PupilModel {
    pub min_diameter_mm: f64,
    pub max_diameter_mm: f64,
    /// Dilation speed, mm/s.
    pub ramp_rate: f64,
    pub iris_diameter_mm: f64,
    pub sclera_diameter_mm: f64,
}

impl Default for PupilModel {
    fn default() -> Self {
        PupilModel {
            min_diameter_mm: 10.0,
            max_diameter_mm: 40.0,
            ramp_rate: 0.6,
            iris_diameter_mm: 45.0,
            sclera_diameter_mm: 85.0,
        }
    }
}

impl PupilModel {
    pub fn validate(&self) -> Result<(), AnimationError> {
        let all_positive = [
            self.min_diameter_mm,
            self.max_diameter_mm,
            self.ramp_rate,
            self.iris_diameter_mm,
            self.sclera_diameter_mm,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(AnimationError::InvalidConfig(
                "pupil model values must be positive".into(),
            ));
        }
        if self.min_diameter_mm >= self.max_diameter_mm {
            return Err(AnimationError::InvalidConfig("min diameter must be below max".into()));
        }
        if self.iris_diameter_mm >= self.sclera_diameter_mm {
            return Err(AnimationError::InvalidConfig("iris must be smaller than sclera".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<PupilModel, AnimationError> {
        let m: PupilModel = toml::from_str(text).map_err(|e| AnimationError::InvalidConfig(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serializes")
    }

    /// Pupil diameter after dilating for `t` seconds from the minimum.
    pub fn ramp(&self, t: f64) -> Result<f64, AnimationError> {
        if t.is_nan() || t < 0.0 {
            return Err(AnimationError::NegativeTime(t));
        }
        Ok((self.min_diameter_mm + self.ramp_rate * t).min(self.max_diameter_mm))
    }

    pub fn mm_to_fraction(&self, d: f64) -> Result<f64, AnimationError> {
        if !(0.0..=self.iris_diameter_mm).contains(&d) {
            return Err(AnimationError::OutOfRange {
                what: "pupil diameter (mm)",
                value: d,
                min: 0.0,
                max: self.iris_diameter_mm,
            });
        }
        Ok(d / self.iris_diameter_mm)
    }

    pub fn fraction_to_mm(&self, fraction: f64) -> Result<f64, AnimationError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(AnimationError::OutOfRange {
                what: "pupil fraction",
                value: fraction,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(fraction * self.iris_diameter_mm)
    }
}

/// Free-function form of [`PupilModel::ramp`].
pub fn pupil_ramp(model: &PupilModel, t: f64) -> Result<f64, AnimationError> {
    model.ramp(t)
}

/// Offset range, in percentage points of iris diameter, relative to neutral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetRange(pub f64, pub f64);

impl OffsetRange {
    pub fn low(&self) -> f64 {
        self.0.min(self.1)
    }

    pub fn high(&self) -> f64 {
        self.0.max(self.1)
    }

    pub fn midpoint(&self) -> f64 {
        (self.0 + self.1) / 2.0
    }
}

/// Per-emotion pupil targets around the neutral fraction.
///
/// An emotion without an entry (tired, by default) has no reliable target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PupilTargetTable {
    pub neutral_fraction: f64,
    pub offsets: BTreeMap<Emotion, OffsetRange>,
}

impl Default for PupilTargetTable {
    fn default() -> Self {
        let offsets = [
            (Emotion::Happy, OffsetRange(3.0, 8.0)),
            (Emotion::Surprise, OffsetRange(3.0, 8.0)),
            (Emotion::Stern, OffsetRange(-2.0, -2.0)),
            (Emotion::Angry, OffsetRange(-5.0, -3.0)),
            (Emotion::Afraid, OffsetRange(-3.0, -3.0)),
            (Emotion::Sad, OffsetRange(4.0, 4.0)),
            (Emotion::Disgust, OffsetRange(1.0, 3.0)),
        ]
        .into_iter()
        .collect();
        PupilTargetTable {
            neutral_fraction: 0.25,
            offsets,
        }
    }
}

/// Resolved pupil target with its admissible range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PupilTarget {
    pub fraction: f64,
    pub min_fraction: f64,
    pub max_fraction: f64,
}

impl PupilTargetTable {
    pub fn from_toml(text: &str) -> Result<PupilTargetTable, AnimationError> {
        let t: PupilTargetTable = toml::from_str(text).map_err(|e| AnimationError::InvalidConfig(e.to_string()))?;
        if !(0.0..=1.0).contains(&t.neutral_fraction) {
            return Err(AnimationError::InvalidConfig("neutral_fraction outside [0, 1]".into()));
        }
        if t.offsets.contains_key(&Emotion::Neutral) {
            return Err(AnimationError::InvalidConfig("neutral cannot carry an offset".into()));
        }
        Ok(t)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serializes")
    }

    pub fn target(&self, emotion: Emotion) -> Result<PupilTarget, AnimationError> {
        if emotion == Emotion::Neutral {
            let n = self.neutral_fraction;
            return Ok(PupilTarget {
                fraction: n,
                min_fraction: n,
                max_fraction: n,
            });
        }
        let range = self
            .offsets
            .get(&emotion)
            .ok_or(AnimationError::TargetUnspecified(emotion))?;
        Ok(PupilTarget {
            fraction: self.neutral_fraction + range.midpoint() / 100.0,
            min_fraction: self.neutral_fraction + range.low() / 100.0,
            max_fraction: self.neutral_fraction + range.high() / 100.0,
        })
    }
}

/// Free-function form of [`PupilTargetTable::target`], returning the scalar.
pub fn pupil_target(table: &PupilTargetTable, emotion: Emotion) -> Result<f64, AnimationError> {
    table.target(emotion).map(|t| t.fraction)
}
