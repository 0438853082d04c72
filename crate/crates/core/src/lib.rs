//! Hybrid face engine.
//!
//! A face is a 13-component [`FaceState`]. Expressions come from blending a
//! [`BasisSet`] with categorical weights or an [`AffectPoint`]; the
//! [`animation`] module moves states through time (transitions, blinks,
//! twitches, pupil dilation) and [`render`] turns a state into a vector
//! scene graph for either the full hybrid face or the eyes-only mode.

pub mod animation;
pub mod error;
pub mod face;
pub mod render;

mod hash;

pub use error::{AnimationError, BasisLoadError, FaceError, RenderError};
pub use face::{
    blend_affect3d, blend_affect3d_raw, blend_categorical, blend_categorical_raw, clamp, load_basis, AffectAxis,
    AffectPoint, BasisSet, CategoricalWeights, Dof, Emotion, FaceState, DOF_COUNT,
};
