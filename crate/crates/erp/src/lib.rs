//! EEG event-related potential analysis.
//!
//! ```text
//! Recording ──bandpass_zero_phase──▶ epoch ──reject_artifacts──▶ baseline_correct
//!      ──grand_average──▶ ErpWaveform ──n170──▶ N170Measure / ChannelTable
//! ```
//!
//! Per-channel and per-epoch work runs through [`Execution`]; the parallel
//! and sequential modes give bit-identical results.

pub mod average;
pub mod epoch;
pub mod error;
pub mod exec;
pub mod filter;
pub mod n170;
pub mod pipeline;
pub mod recording;
pub mod stats;
pub mod synth;

pub use average::{grand_average, AverageMode, ErpWaveform, GrandAverage, GroupBy};
pub use epoch::{
    apply_exclusions, baseline_correct, epoch, reject_artifacts, Epoch, EpochSet, EpochWindow, LabelCounts,
    RejectReason, RejectionReport,
};
pub use error::{ErpError, Result};
pub use exec::Execution;
pub use filter::{bandpass_zero_phase, Butterworth, Padding};
pub use n170::{channel_table, n170, ChannelTable, N170Measure, N170Options};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
pub use recording::{quantize_onsets, Event, EventList, Recording};
pub use stats::{anova1, f_upper_tail, reg_inc_beta, AnovaResult};
pub use synth::{synthesize_eeg, SynthSpec, Synthesis};
