//! The authoritative face engine: target state, active transition, realism
//! overlay and frame rendering on a logical millisecond clock.
//!
//! Frame `k` is sampled at `k * 1000 / tick_hz` ms. Nothing reads the wall
//! clock, so a command sequence with timestamps plus the seed fixes every
//! frame.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hybrid_face::animation::{realism_overlay, Easing, RealismConfig, Timeline, DEFAULT_TRANSITION_MS};
use hybrid_face::render::{render, RenderMode, SceneGraph};
use hybrid_face::{
    blend_affect3d, blend_categorical, AffectPoint, BasisSet, CategoricalWeights, Dof, Emotion, FaceState,
};

use crate::error::{Result, ServiceError};
use crate::protocol::{Command, ErrorCode, ProtocolError};

pub const DEFAULT_TICK_HZ: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Seeds the realism overlay.
    pub seed: u64,
    pub tick_hz: f64,
    pub mode: RenderMode,
    /// Overlay applied outside sessions.
    pub realism_enabled: bool,
    pub realism: RealismConfig,
    /// Used when a command gives no transition length.
    pub transition_ms: f64,
    pub easing: Easing,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seed: 0,
            tick_hz: DEFAULT_TICK_HZ,
            mode: RenderMode::HybridFull,
            realism_enabled: false,
            realism: RealismConfig::default(),
            transition_ms: DEFAULT_TRANSITION_MS,
            easing: Easing::Smoothstep,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tick_hz > 0.0 && self.tick_hz.is_finite()) {
            return Err(ServiceError::Config(format!(
                "tick_hz {} must be positive",
                self.tick_hz
            )));
        }
        if !(self.transition_ms >= 0.0 && self.transition_ms.is_finite()) {
            return Err(ServiceError::Config(format!(
                "transition_ms {} must be >= 0",
                self.transition_ms
            )));
        }
        self.realism.validate()?;
        Ok(())
    }
}

/// One rendered frame as broadcast to UI clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: String,
    pub index: u64,
    pub t_ms: f64,
    /// Nothing is shown (fixation or blank screen).
    pub blank: bool,
    pub state: FaceState,
    pub scene: SceneGraph,
}

impl Frame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }

    /// Hex SHA-256 of the JSON encoding.
    pub fn digest(&self) -> String {
        hex_digest(self.to_json().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// How the session layer wants the face presented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Presentation {
    pub blank: bool,
    pub realism: bool,
    pub suppress_blinks: bool,
}

#[derive(Debug, Clone)]
pub struct Engine {
    basis: BasisSet,
    config: EngineConfig,
    mode: RenderMode,
    target: FaceState,
    /// Active transition and its start time.
    transition: Option<(Timeline, f64)>,
    presentation: Option<Presentation>,
    frame_index: u64,
    last_event_ms: f64,
}

fn invalid(message: impl ToString) -> ProtocolError {
    ProtocolError::new(ErrorCode::InvalidPayload, message.to_string())
}

impl Engine {
    pub fn new(basis: BasisSet, config: EngineConfig) -> Result<Engine> {
        config.validate()?;
        let target = *basis.neutral();
        Ok(Engine {
            basis,
            mode: config.mode,
            config,
            target,
            transition: None,
            presentation: None,
            frame_index: 0,
            last_event_ms: 0.0,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn mode(&self) -> RenderMode {
        self.mode
    }

    pub fn target(&self) -> FaceState {
        self.target
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn frame_time(&self, index: u64) -> f64 {
        index as f64 * 1000.0 / self.config.tick_hz
    }

    pub fn next_frame_time(&self) -> f64 {
        self.frame_time(self.frame_index)
    }

    /// Interpolated state at `t_ms`, before the overlay.
    pub fn base_state(&self, t_ms: f64) -> FaceState {
        match &self.transition {
            Some((tl, start)) => {
                let dt = (t_ms - start).clamp(0.0, tl.duration_ms);
                tl.sample(dt).unwrap_or(tl.end_state)
            }
            None => self.target,
        }
    }

    /// Starts a transition from the state at `t_ms` to `target`.
    pub fn set_target(
        &mut self,
        t_ms: f64,
        target: FaceState,
        transition_ms: Option<f64>,
    ) -> std::result::Result<FaceState, ProtocolError> {
        let d = transition_ms.unwrap_or(self.config.transition_ms);
        if !(d >= 0.0 && d.is_finite()) {
            return Err(invalid(format!("transition_ms {d} must be a finite value >= 0")));
        }
        let from = self.base_state(t_ms);
        self.transition = if d > 0.0 {
            Some((
                Timeline::new(from, target, d, self.config.easing).map_err(invalid)?,
                t_ms,
            ))
        } else {
            None
        };
        self.target = target;
        self.last_event_ms = self.last_event_ms.max(t_ms);
        Ok(target)
    }

    /// Validates a face command and computes its target without mutating.
    pub fn resolve(&self, command: &Command) -> std::result::Result<Option<(FaceState, Option<f64>)>, ProtocolError> {
        let resolved = match command {
            Command::SetEmotion {
                emotion, transition_ms, ..
            } => (*self.basis.get(*emotion), *transition_ms),
            Command::SetAffect {
                alpha,
                beta,
                gamma,
                transition_ms,
            } => {
                let p = AffectPoint::new(*alpha, *beta, *gamma).map_err(invalid)?;
                (blend_affect3d(&self.basis, &p).map_err(invalid)?, *transition_ms)
            }
            Command::SetWeights { weights, transition_ms } => {
                let w = CategoricalWeights::from_pairs(weights.iter().map(|(e, w)| (*e, *w))).map_err(invalid)?;
                (blend_categorical(&self.basis, &w), *transition_ms)
            }
            Command::SetPupil {
                fraction,
                transition_ms,
            } => {
                let (lo, hi) = Dof::Pupil.range();
                if !(fraction.is_finite() && (lo..=hi).contains(fraction)) {
                    return Err(invalid(format!("pupil fraction {fraction} outside [{lo}, {hi}]")));
                }
                (
                    self.target.with(Dof::Pupil, *fraction).map_err(invalid)?,
                    *transition_ms,
                )
            }
            _ => return Ok(None),
        };
        if let Some(d) = resolved.1 {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid(format!("transition_ms {d} must be a finite value >= 0")));
            }
        }
        Ok(Some(resolved))
    }

    /// Applies a face command at `t_ms`; returns the new target. Invalid
    /// commands leave the engine untouched.
    pub fn apply(&mut self, t_ms: f64, command: &Command) -> std::result::Result<FaceState, ProtocolError> {
        if let Command::SetMode { mode } = command {
            self.mode = *mode;
            return Ok(self.target);
        }
        match self.resolve(command)? {
            Some((target, d)) => self.set_target(t_ms, target, d),
            None => Err(invalid("not a face command")),
        }
    }

    /// Shows an emotion as the session layer asks for it.
    pub fn show(&mut self, t_ms: f64, emotion: Emotion, transition_ms: f64) -> FaceState {
        let target = *self.basis.get(emotion);
        self.set_target(t_ms, target, Some(transition_ms)).unwrap_or(target)
    }

    /// Overrides blank/realism handling; `None` returns to engine defaults.
    pub fn set_presentation(&mut self, presentation: Option<Presentation>) {
        self.presentation = presentation;
    }

    pub fn set_mode(&mut self, mode: RenderMode) {
        self.mode = mode;
    }

    fn overlay_config(&self) -> Option<RealismConfig> {
        let (on, suppress) = match self.presentation {
            Some(p) => (p.realism, p.suppress_blinks),
            None => (self.config.realism_enabled, false),
        };
        if !on {
            return None;
        }
        let mut cfg = RealismConfig {
            rng_seed: self.config.seed,
            ..self.config.realism
        };
        if suppress {
            cfg.blink_mean_interval = f64::INFINITY;
        }
        Some(cfg)
    }

    /// State shown at `t_ms`, overlay included.
    pub fn display_state(&self, t_ms: f64) -> FaceState {
        let base = self.base_state(t_ms);
        match self.overlay_config() {
            Some(cfg) => realism_overlay(&base, t_ms / 1000.0, &cfg),
            None => base,
        }
    }

    /// Renders the next frame and advances the frame counter.
    pub fn render_next(&mut self) -> Result<Frame> {
        let t_ms = self.next_frame_time();
        let state = self.display_state(t_ms);
        let blank = self.presentation.is_some_and(|p| p.blank);
        let scene = if blank {
            let s = render(&state, self.mode)?;
            SceneGraph::empty(s.width, s.height, self.mode)
        } else {
            render(&state, self.mode)?
        };
        let frame = Frame {
            kind: "frame".into(),
            index: self.frame_index,
            t_ms,
            blank,
            state,
            scene,
        };
        self.frame_index += 1;
        self.last_event_ms = self.last_event_ms.max(t_ms);
        Ok(frame)
    }

    /// Advances the frame counter without rendering.
    pub fn skip_frame(&mut self) {
        self.last_event_ms = self.last_event_ms.max(self.next_frame_time());
        self.frame_index += 1;
    }
}
