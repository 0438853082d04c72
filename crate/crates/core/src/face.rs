//! The 13-DoF face state and the two affect-space blending models.
//!
//! Every displayed expression is a blend of a neutral state and eight
//! basis expressions. The categorical model takes one weight per basis
//! emotion; the three-axis model takes a point in (valence, arousal,
//! stance) space and activates at most one basis expression per axis.
//!
//! Blends are evaluated in the convex-combination form
//! `(1 - Σc)·neutral + Σ cᵢ·basisᵢ`, which is algebraically identical to
//! `neutral + Σ cᵢ·(basisᵢ - neutral)` but reproduces basis corners bit for
//! bit. The result is clamped once, after summation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BasisLoadError, FaceError};

/// Number of independent facial degrees of freedom.
pub const DOF_COUNT: usize = 13;

/// One facial degree of freedom, in canonical vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dof {
    BrowAngleLeft,
    BrowAngleRight,
    BrowHeightLeft,
    BrowHeightRight,
    LidOpenLeft,
    LidOpenRight,
    EyePitch,
    EyeYaw,
    Pupil,
    MouthCornerHeight,
    MouthWidth,
    LipOpenTop,
    LipOpenBottom,
}

impl Dof {
    pub const ALL: [Dof; DOF_COUNT] = [
        Dof::BrowAngleLeft,
        Dof::BrowAngleRight,
        Dof::BrowHeightLeft,
        Dof::BrowHeightRight,
        Dof::LidOpenLeft,
        Dof::LidOpenRight,
        Dof::EyePitch,
        Dof::EyeYaw,
        Dof::Pupil,
        Dof::MouthCornerHeight,
        Dof::MouthWidth,
        Dof::LipOpenTop,
        Dof::LipOpenBottom,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Canonical field name, as used in basis files and on the wire.
    pub fn name(self) -> &'static str {
        match self {
            Dof::BrowAngleLeft => "brow_angle_left",
            Dof::BrowAngleRight => "brow_angle_right",
            Dof::BrowHeightLeft => "brow_height_left",
            Dof::BrowHeightRight => "brow_height_right",
            Dof::LidOpenLeft => "lid_open_left",
            Dof::LidOpenRight => "lid_open_right",
            Dof::EyePitch => "eye_pitch",
            Dof::EyeYaw => "eye_yaw",
            Dof::Pupil => "pupil",
            Dof::MouthCornerHeight => "mouth_corner_height",
            Dof::MouthWidth => "mouth_width",
            Dof::LipOpenTop => "lip_open_top",
            Dof::LipOpenBottom => "lip_open_bottom",
        }
    }

    /// Closed interval `(min, max)` the value must lie in.
    pub fn range(self) -> (f64, f64) {
        match self {
            Dof::BrowAngleLeft
            | Dof::BrowAngleRight
            | Dof::BrowHeightLeft
            | Dof::BrowHeightRight
            | Dof::EyePitch
            | Dof::EyeYaw
            | Dof::MouthCornerHeight => (-1.0, 1.0),
            Dof::LidOpenLeft
            | Dof::LidOpenRight
            | Dof::Pupil
            | Dof::MouthWidth
            | Dof::LipOpenTop
            | Dof::LipOpenBottom => (0.0, 1.0),
        }
    }

    pub fn from_name(name: &str) -> Option<Dof> {
        Dof::ALL.iter().copied().find(|d| d.name() == name)
    }

    /// Brow DoF: subject to twitch jitter and absent from eyes-only rendering.
    pub fn is_brow(self) -> bool {
        matches!(
            self,
            Dof::BrowAngleLeft | Dof::BrowAngleRight | Dof::BrowHeightLeft | Dof::BrowHeightRight
        )
    }

    pub fn is_lid(self) -> bool {
        matches!(self, Dof::LidOpenLeft | Dof::LidOpenRight)
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complete facial configuration.
///
/// Angles, heights, gaze and mouth-corner height are normalized to
/// `[-1, 1]`; openings, widths and the pupil to `[0, 1]`. The pupil is a
/// fraction of the iris diameter. Construct through [`FaceState::from_array`]
/// or [`clamp`] so the range invariant holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceState {
    pub brow_angle_left: f64,
    pub brow_angle_right: f64,
    pub brow_height_left: f64,
    pub brow_height_right: f64,
    pub lid_open_left: f64,
    pub lid_open_right: f64,
    pub eye_pitch: f64,
    pub eye_yaw: f64,
    pub pupil: f64,
    pub mouth_corner_height: f64,
    pub mouth_width: f64,
    pub lip_open_top: f64,
    pub lip_open_bottom: f64,
}

impl FaceState {
    /// Builds a state from a canonical vector, rejecting out-of-range or
    /// non-finite components.
    pub fn from_array(values: [f64; DOF_COUNT]) -> Result<FaceState, FaceError> {
        for dof in Dof::ALL {
            check_component(dof, values[dof.index()])?;
        }
        Ok(FaceState::from_array_unchecked(values))
    }

    pub(crate) fn from_array_unchecked(v: [f64; DOF_COUNT]) -> FaceState {
        FaceState {
            brow_angle_left: v[0],
            brow_angle_right: v[1],
            brow_height_left: v[2],
            brow_height_right: v[3],
            lid_open_left: v[4],
            lid_open_right: v[5],
            eye_pitch: v[6],
            eye_yaw: v[7],
            pupil: v[8],
            mouth_corner_height: v[9],
            mouth_width: v[10],
            lip_open_top: v[11],
            lip_open_bottom: v[12],
        }
    }

    pub fn to_array(&self) -> [f64; DOF_COUNT] {
        [
            self.brow_angle_left,
            self.brow_angle_right,
            self.brow_height_left,
            self.brow_height_right,
            self.lid_open_left,
            self.lid_open_right,
            self.eye_pitch,
            self.eye_yaw,
            self.pupil,
            self.mouth_corner_height,
            self.mouth_width,
            self.lip_open_top,
            self.lip_open_bottom,
        ]
    }

    pub fn get(&self, dof: Dof) -> f64 {
        self.to_array()[dof.index()]
    }

    /// Returns a copy with one component replaced, clipped to its interval.
    pub fn with(&self, dof: Dof, value: f64) -> Result<FaceState, FaceError> {
        let mut raw = self.to_array();
        raw[dof.index()] = value;
        clamp(raw)
    }

    /// Checks the range invariant; useful after deserializing untrusted input.
    pub fn validate(&self) -> Result<(), FaceError> {
        FaceState::from_array(self.to_array()).map(|_| ())
    }
}

fn check_component(dof: Dof, value: f64) -> Result<(), FaceError> {
    if !value.is_finite() {
        return Err(FaceError::NonFinite { dof: dof.name() });
    }
    let (min, max) = dof.range();
    if value < min || value > max {
        return Err(FaceError::OutOfRange {
            dof: dof.name(),
            value,
            min,
            max,
        });
    }
    Ok(())
}

/// Clips every component of a raw vector to its interval.
///
/// In-range components are returned untouched, so `clamp` is idempotent.
pub fn clamp(raw: [f64; DOF_COUNT]) -> Result<FaceState, FaceError> {
    let mut out = raw;
    for dof in Dof::ALL {
        let v = raw[dof.index()];
        if !v.is_finite() {
            return Err(FaceError::NonFinite { dof: dof.name() });
        }
        let (min, max) = dof.range();
        out[dof.index()] = v.clamp(min, max);
    }
    Ok(FaceState::from_array_unchecked(out))
}

/// Displayable emotions: eight basis expressions plus neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happy,
    Sad,
    Angry,
    Afraid,
    Surprise,
    Tired,
    Stern,
    Disgust,
    Neutral,
}

impl Emotion {
    /// The eight basis emotions, in the order used for weight vectors.
    pub const BASIS: [Emotion; 8] = [
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Angry,
        Emotion::Afraid,
        Emotion::Surprise,
        Emotion::Tired,
        Emotion::Stern,
        Emotion::Disgust,
    ];

    /// Index into [`Emotion::BASIS`]; `None` for neutral.
    pub fn basis_index(self) -> Option<usize> {
        Emotion::BASIS.iter().position(|&e| e == self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Afraid => "afraid",
            Emotion::Surprise => "surprise",
            Emotion::Tired => "tired",
            Emotion::Stern => "stern",
            Emotion::Disgust => "disgust",
            Emotion::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = FaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Emotion::BASIS
            .iter()
            .chain(std::iter::once(&Emotion::Neutral))
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| FaceError::UnknownEmotion(s.to_string()))
    }
}

/// Neutral plus one state per basis emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    neutral: FaceState,
    basis: [FaceState; 8],
}

/// Basis file shipped with the crate.
pub const DEFAULT_BASIS_TOML: &str = include_str!("../data/default_basis.toml");

/// Version written to and required in basis documents.
pub const BASIS_SCHEMA_VERSION: i64 = 1;

impl BasisSet {
    /// Builds a basis set; the entries must cover all eight basis emotions.
    pub fn new(
        neutral: FaceState,
        entries: impl IntoIterator<Item = (Emotion, FaceState)>,
    ) -> Result<BasisSet, FaceError> {
        neutral.validate()?;
        let mut slots: [Option<FaceState>; 8] = [None; 8];
        for (emotion, state) in entries {
            state.validate()?;
            let idx = emotion.basis_index().ok_or(FaceError::NeutralAsBasis)?;
            slots[idx] = Some(state);
        }
        let mut basis = [neutral; 8];
        for (idx, slot) in slots.iter().enumerate() {
            basis[idx] = slot.ok_or(FaceError::MissingBasis(Emotion::BASIS[idx]))?;
        }
        Ok(BasisSet { neutral, basis })
    }

    /// The shipped default basis.
    pub fn default_set() -> BasisSet {
        load_basis(DEFAULT_BASIS_TOML, false).expect("shipped basis file is valid")
    }

    pub fn neutral(&self) -> &FaceState {
        &self.neutral
    }

    /// State for any emotion, neutral included.
    pub fn get(&self, emotion: Emotion) -> &FaceState {
        match emotion.basis_index() {
            Some(idx) => &self.basis[idx],
            None => &self.neutral,
        }
    }

    /// Returns a copy with one entry replaced.
    pub fn with(&self, emotion: Emotion, state: FaceState) -> Result<BasisSet, FaceError> {
        state.validate()?;
        let mut out = self.clone();
        match emotion.basis_index() {
            Some(idx) => out.basis[idx] = state,
            None => out.neutral = state,
        }
        Ok(out)
    }

    /// Serializes to the basis document format read by [`load_basis`].
    pub fn to_toml(&self) -> String {
        let mut out = format!("schema = {BASIS_SCHEMA_VERSION}\n");
        let entries = std::iter::once(Emotion::Neutral).chain(Emotion::BASIS);
        for emotion in entries {
            out.push_str(&format!("\n[{}]\n", emotion.name()));
            let state = self.get(emotion).to_array();
            for dof in Dof::ALL {
                out.push_str(&format!("{} = {:?}\n", dof.name(), state[dof.index()]));
            }
        }
        out
    }
}

/// Reads a basis document.
///
/// The document is TOML with a top-level `schema = 1` and one table per
/// emotion (`neutral` plus the eight basis emotions), each holding all 13
/// canonical fields. With `lenient` set, out-of-range values are clipped
/// instead of rejected; unknown tables or fields are always errors.
pub fn load_basis(source: &str, lenient: bool) -> Result<BasisSet, BasisLoadError> {
    let doc: toml::Table = toml::from_str(source).map_err(|e| BasisLoadError::Parse(e.to_string()))?;

    match doc.get("schema") {
        Some(toml::Value::Integer(v)) if *v == BASIS_SCHEMA_VERSION => {}
        Some(other) => return Err(BasisLoadError::Schema(other.to_string())),
        None => return Err(BasisLoadError::Schema("missing".to_string())),
    }

    let mut entries: BTreeMap<Emotion, FaceState> = BTreeMap::new();
    for (key, value) in &doc {
        if key == "schema" {
            continue;
        }
        let emotion: Emotion = key.parse().map_err(|_| BasisLoadError::UnknownEntry(key.clone()))?;
        let table = value.as_table().ok_or_else(|| BasisLoadError::NotATable(key.clone()))?;
        entries.insert(emotion, parse_state(key, table, lenient)?);
    }

    let required = std::iter::once(Emotion::Neutral).chain(Emotion::BASIS);
    for emotion in required {
        if !entries.contains_key(&emotion) {
            return Err(BasisLoadError::MissingEmotion(emotion.name().to_string()));
        }
    }
    let neutral = entries.remove(&Emotion::Neutral).expect("checked above");
    // Every state was validated while parsing.
    BasisSet::new(neutral, entries).map_err(|e| BasisLoadError::Invalid(e.to_string()))
}

fn parse_state(entry: &str, table: &toml::Table, lenient: bool) -> Result<FaceState, BasisLoadError> {
    for key in table.keys() {
        if Dof::from_name(key).is_none() {
            return Err(BasisLoadError::UnknownField {
                entry: entry.to_string(),
                field: key.clone(),
            });
        }
    }
    let mut raw = [0.0; DOF_COUNT];
    for dof in Dof::ALL {
        let value = table.get(dof.name()).ok_or_else(|| BasisLoadError::MissingField {
            entry: entry.to_string(),
            field: dof.name(),
        })?;
        let v = match value {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            _ => {
                return Err(BasisLoadError::NotANumber {
                    entry: entry.to_string(),
                    field: dof.name(),
                })
            }
        };
        if !v.is_finite() {
            return Err(BasisLoadError::NotANumber {
                entry: entry.to_string(),
                field: dof.name(),
            });
        }
        let (min, max) = dof.range();
        if !lenient && (v < min || v > max) {
            return Err(BasisLoadError::OutOfRange {
                entry: entry.to_string(),
                field: dof.name(),
                value: v,
            });
        }
        raw[dof.index()] = v;
    }
    Ok(clamp(raw).expect("finite values"))
}

/// Categorical weights, one per basis emotion, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CategoricalWeights([f64; 8]);

impl CategoricalWeights {
    pub fn zero() -> CategoricalWeights {
        CategoricalWeights([0.0; 8])
    }

    /// Weights in [`Emotion::BASIS`] order.
    pub fn from_array(weights: [f64; 8]) -> Result<CategoricalWeights, FaceError> {
        for (idx, &w) in weights.iter().enumerate() {
            check_weight(Emotion::BASIS[idx], w)?;
        }
        Ok(CategoricalWeights(weights))
    }

    /// Weights by emotion; unlisted emotions get zero.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Emotion, f64)>) -> Result<CategoricalWeights, FaceError> {
        let mut out = [0.0; 8];
        for (emotion, w) in pairs {
            let idx = emotion.basis_index().ok_or(FaceError::NeutralAsBasis)?;
            check_weight(emotion, w)?;
            out[idx] = w;
        }
        Ok(CategoricalWeights(out))
    }

    /// A single emotion at full weight.
    pub fn single(emotion: Emotion) -> Result<CategoricalWeights, FaceError> {
        CategoricalWeights::from_pairs([(emotion, 1.0)])
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        emotion.basis_index().map_or(0.0, |i| self.0[i])
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }
}

fn check_weight(emotion: Emotion, w: f64) -> Result<(), FaceError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(FaceError::WeightOutOfRange { emotion, value: w });
    }
    Ok(())
}

/// Affect-space axis of the three-dimensional model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffectAxis {
    Valence,
    Arousal,
    Stance,
}

impl AffectAxis {
    /// Basis emotions at the (positive, negative) ends of the axis.
    pub fn poles(self) -> (Emotion, Emotion) {
        match self {
            AffectAxis::Valence => (Emotion::Happy, Emotion::Sad),
            AffectAxis::Arousal => (Emotion::Surprise, Emotion::Tired),
            AffectAxis::Stance => (Emotion::Angry, Emotion::Afraid),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AffectAxis::Valence => "alpha",
            AffectAxis::Arousal => "beta",
            AffectAxis::Stance => "gamma",
        }
    }
}

/// A point in (valence, arousal, stance) space; each coordinate in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectPoint {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl AffectPoint {
    pub const ORIGIN: AffectPoint = AffectPoint {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<AffectPoint, FaceError> {
        let p = AffectPoint { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FaceError> {
        for (axis, v) in [
            (AffectAxis::Valence, self.alpha),
            (AffectAxis::Arousal, self.beta),
            (AffectAxis::Stance, self.gamma),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(FaceError::AffectOutOfRange {
                    axis: axis.name(),
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Activation of each axis-pole emotion: `max(±coordinate, 0)`.
    pub fn activations(&self) -> [(Emotion, f64); 6] {
        [
            (Emotion::Happy, self.alpha.max(0.0)),
            (Emotion::Sad, (-self.alpha).max(0.0)),
            (Emotion::Surprise, self.beta.max(0.0)),
            (Emotion::Tired, (-self.beta).max(0.0)),
            (Emotion::Angry, self.gamma.max(0.0)),
            (Emotion::Afraid, (-self.gamma).max(0.0)),
        ]
    }
}

fn combine(basis: &BasisSet, terms: impl Iterator<Item = (Emotion, f64)> + Clone) -> [f64; DOF_COUNT] {
    let total: f64 = terms.clone().map(|(_, c)| c).sum();
    let neutral = basis.neutral.to_array();
    let mut out = [0.0; DOF_COUNT];
    for (o, n) in out.iter_mut().zip(neutral) {
        *o = (1.0 - total) * n;
    }
    for (emotion, c) in terms {
        if c == 0.0 {
            continue;
        }
        let b = basis.get(emotion).to_array();
        for (o, v) in out.iter_mut().zip(b) {
            *o += c * v;
        }
    }
    out
}

/// Categorical blend before clipping.
pub fn blend_categorical_raw(basis: &BasisSet, weights: &CategoricalWeights) -> [f64; DOF_COUNT] {
    combine(basis, Emotion::BASIS.iter().copied().zip(weights.0.iter().copied()))
}

/// Categorical affect space: neutral plus weighted offsets toward each
/// basis expression, clipped to the DoF intervals.
pub fn blend_categorical(basis: &BasisSet, weights: &CategoricalWeights) -> FaceState {
    clamp(blend_categorical_raw(basis, weights)).expect("finite blend")
}

/// Three-axis blend before clipping.
pub fn blend_affect3d_raw(basis: &BasisSet, point: &AffectPoint) -> [f64; DOF_COUNT] {
    combine(basis, point.activations().into_iter())
}

/// Three-dimensional affect space. Each axis activates only the basis
/// expression at the end the point lies toward; stern and disgust are not
/// reachable here.
pub fn blend_affect3d(basis: &BasisSet, point: &AffectPoint) -> Result<FaceState, FaceError> {
    point.validate()?;
    Ok(clamp(blend_affect3d_raw(basis, point)).expect("finite blend"))
}
