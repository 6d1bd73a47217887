//! Signal conditioning: resampling to the common rate, band-pass
//! filtering, spike removal, heart-cycle segmentation, and shaping cycles
//! into the fixed-length windows the network consumes.

pub mod filter;
pub mod resample;
pub mod segment;
pub mod spikes;

pub use filter::{bandpass, FilterKind, FilterSpec};
pub use resample::resample;
pub use segment::{segment_cycles, CycleBoundaries};
pub use spikes::remove_spikes;

use std::fmt;

use crate::signal_io::{Label, Recording};
use crate::scalar::Scalar;

/// Every cycle is truncated or zero-padded to this many samples.
pub const CYCLE_LEN: usize = 2500;

/// Common sampling rate the whole pipeline runs at, in Hz.
pub const TARGET_SAMPLE_RATE: u32 = 1000;

/// Segments shorter than this are discarded as segmentation artifacts.
pub const MIN_CYCLE_LEN: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub enum PreprocessError {
    /// The resampler only downsamples.
    UpsampleUnsupported { src: u32, dst: u32 },
    /// Input too short for the requested operation.
    SignalTooShort { len: usize, needed: usize },
    /// Segmentation found no plausible heart cycles.
    NoCyclesFound,
    /// Filter specification violates its invariants at this sample rate.
    InvalidFilter(String),
}

impl fmt::Display for PreprocessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessError::UpsampleUnsupported { src, dst } => {
                write!(f, "cannot resample {src} Hz up to {dst} Hz")
            }
            PreprocessError::SignalTooShort { len, needed } => {
                write!(f, "signal of {len} samples is shorter than the required {needed}")
            }
            PreprocessError::NoCyclesFound => write!(f, "no heart cycles found"),
            PreprocessError::InvalidFilter(msg) => write!(f, "invalid filter: {msg}"),
        }
    }
}

impl std::error::Error for PreprocessError {}

/// One fixed-length heart-sound cycle with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub samples: Vec<f32>,
    pub patient_id: String,
    pub record_id: String,
    pub label: Label,
    pub cycle_index: u32,
}

/// Truncates to `target` samples or right-pads with zeros.
pub fn fix_length<T: Scalar>(samples: &[T], target: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(target);
    out.extend_from_slice(&samples[..samples.len().min(target)]);
    out.resize(target, T::zero());
    out
}

/// Per-cycle peak normalization followed by a +1 offset, mapping the
/// waveform into `[0, 2]` for the convolutional stream. Silent cycles
/// skip the normalization and come out all ones.
pub fn scale_samples_for_conv<T: Scalar>(samples: &[T]) -> Vec<T> {
    let peak = samples.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    if peak == T::zero() {
        return vec![T::one(); samples.len()];
    }
    samples.iter().map(|&v| v / peak + T::one()).collect()
}

/// [`scale_samples_for_conv`] lifted onto a [`Cycle`].
pub fn scale_for_conv(cycle: &Cycle) -> Cycle {
    Cycle {
        samples: scale_samples_for_conv(&cycle.samples),
        ..cycle.clone()
    }
}

/// Full conditioning chain for one recording: resample to
/// [`TARGET_SAMPLE_RATE`], band-pass, despike, segment, and emit
/// fixed-length cycles inheriting the recording's label.
pub fn preprocess_recording(recording: &Recording, spec: &FilterSpec) -> Result<Vec<Cycle>, PreprocessError> {
    let resampled = resample(&recording.samples, recording.sample_rate, TARGET_SAMPLE_RATE)?;
    let filtered = bandpass(&resampled, spec, TARGET_SAMPLE_RATE)?;
    let despiked = remove_spikes(&filtered, TARGET_SAMPLE_RATE);
    let boundaries = segment_cycles(&despiked, TARGET_SAMPLE_RATE)?;

    let cycles = boundaries
        .starts
        .iter()
        .zip(&boundaries.ends)
        .enumerate()
        .map(|(i, (&start, &end))| Cycle {
            samples: fix_length(&despiked[start..end], CYCLE_LEN),
            patient_id: recording.patient_id.clone(),
            record_id: recording.id.clone(),
            label: recording.label,
            cycle_index: i as u32,
        })
        .collect();
    Ok(cycles)
}
