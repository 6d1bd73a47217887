//! MFCC extraction for the recurrent stream.
//!
//! Per frame: Hamming window, power spectrum over a power-of-two DFT,
//! triangular mel filterbank energies, `ln(energy + floor)`, orthonormal
//! DCT-II, keep the first `n_coeffs` coefficients.

pub mod dct;
pub mod mel;

pub use mel::{hz_to_mel, mel_centers, mel_filterbank, mel_to_hz};

use std::fmt;

use crate::fft::fft_in_place;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureError {
    /// Negative frequency or mel value.
    Domain(f64),
    /// Filterbank too dense for the spectral resolution.
    Resolution(String),
    SignalTooShort { len: usize, needed: usize },
    /// Configuration violating its own invariants.
    InvalidConfig(String),
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureError::Domain(v) => write!(f, "value {v} is outside the non-negative domain"),
            FeatureError::Resolution(msg) => write!(f, "filterbank resolution error: {msg}"),
            FeatureError::SignalTooShort { len, needed } => {
                write!(f, "signal of {len} samples is shorter than one frame of {needed}")
            }
            FeatureError::InvalidConfig(msg) => write!(f, "invalid mfcc config: {msg}"),
        }
    }
}

impl std::error::Error for FeatureError {}

/// MFCC analysis parameters. The defaults target the 1000 Hz pipeline
/// rate: 256-sample frames hopped by 128 give 18 frames per 2500-sample
/// cycle, 26 mel filters up to the 500 Hz Nyquist, 13 kept coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            frame_len: 256,
            hop: 128,
            fft_len: 256,
            n_mels: 26,
            n_coeffs: 13,
            f_min: 0.0,
            f_max: 500.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        if !self.fft_len.is_power_of_two() || self.fft_len < self.frame_len {
            return Err(FeatureError::InvalidConfig(format!(
                "fft_len {} must be a power of two at least frame_len {}",
                self.fft_len, self.frame_len
            )));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(FeatureError::InvalidConfig(format!(
                "hop {} must be in 1..=frame_len {}",
                self.hop, self.frame_len
            )));
        }
        if self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(FeatureError::InvalidConfig(format!(
                "n_coeffs {} must be in 1..=n_mels {}",
                self.n_coeffs, self.n_mels
            )));
        }
        if self.f_min < 0.0 || self.f_max <= self.f_min || self.f_max > sample_rate as f64 / 2.0 {
            return Err(FeatureError::InvalidConfig(format!(
                "need 0 <= f_min ({}) < f_max ({}) <= nyquist",
                self.f_min, self.f_max
            )));
        }
        if self.log_floor <= 0.0 {
            return Err(FeatureError::InvalidConfig("log_floor must be positive".into()));
        }
        Ok(())
    }

    /// Frames produced for an input of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            1 + (len - self.frame_len) / self.hop
        }
    }

    /// Key-value serialization for sidecar files.
    pub fn to_text(&self) -> String {
        format!(
            "frame_len = {}\nhop = {}\nfft_len = {}\nn_mels = {}\nn_coeffs = {}\nf_min = {}\nf_max = {}\nlog_floor = {}\n",
            self.frame_len, self.hop, self.fft_len, self.n_mels, self.n_coeffs, self.f_min, self.f_max, self.log_floor
        )
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let mut config = MfccConfig::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FeatureError::InvalidConfig(format!("bad line {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let parse_usize = || {
                value
                    .parse::<usize>()
                    .map_err(|_| FeatureError::InvalidConfig(format!("{key}: {value:?} is not an integer")))
            };
            let parse_f64 = || {
                value
                    .parse::<f64>()
                    .map_err(|_| FeatureError::InvalidConfig(format!("{key}: {value:?} is not a number")))
            };
            match key {
                "frame_len" => config.frame_len = parse_usize()?,
                "hop" => config.hop = parse_usize()?,
                "fft_len" => config.fft_len = parse_usize()?,
                "n_mels" => config.n_mels = parse_usize()?,
                "n_coeffs" => config.n_coeffs = parse_usize()?,
                "f_min" => config.f_min = parse_f64()?,
                "f_max" => config.f_max = parse_f64()?,
                "log_floor" => config.log_floor = parse_f64()?,
                other => {
                    return Err(FeatureError::InvalidConfig(format!("unknown key {other:?}")));
                }
            }
        }
        Ok(config)
    }
}

/// Frames-by-coefficients feature matrix with the frame-center times.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix<T> {
    pub values: Tensor<T>,
    pub frame_times: Vec<f64>,
}

impl<T: Scalar> MfccMatrix<T> {
    pub fn frames(&self) -> usize {
        self.values.dim(0)
    }

    pub fn coeffs(&self) -> usize {
        self.values.dim(1)
    }
}

/// Precomputed tables for a fixed `(config, sample_rate)` pair, reused
/// across cycles.
pub struct MfccExtractor<T> {
    config: MfccConfig,
    sample_rate: u32,
    window: Vec<T>,
    filterbank: Vec<Vec<T>>,
    dct: Vec<Vec<T>>,
}

impl<T: Scalar> MfccExtractor<T> {
    pub fn new(config: MfccConfig, sample_rate: u32) -> Result<Self, FeatureError> {
        config.validate(sample_rate)?;
        let filterbank = mel_filterbank(&config, sample_rate)?;
        let window = hamming(config.frame_len);
        let dct = dct::dct2_matrix(config.n_coeffs, config.n_mels);
        Ok(MfccExtractor {
            config,
            sample_rate,
            window,
            filterbank,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn extract(&self, samples: &[T]) -> Result<MfccMatrix<T>, FeatureError> {
        let c = &self.config;
        if samples.len() < c.frame_len {
            return Err(FeatureError::SignalTooShort {
                len: samples.len(),
                needed: c.frame_len,
            });
        }
        let frames = c.frames_for(samples.len());
        let mut values = Tensor::zeros(&[frames, c.n_coeffs]);
        let mut frame_times = Vec::with_capacity(frames);

        let mut re = vec![T::zero(); c.fft_len];
        let mut im = vec![T::zero(); c.fft_len];
        let bins = c.fft_len / 2 + 1;
        let mut power = vec![T::zero(); bins];
        let floor = T::from_f64(c.log_floor);

        for frame in 0..frames {
            let start = frame * c.hop;
            frame_times.push((start as f64 + c.frame_len as f64 / 2.0) / self.sample_rate as f64);

            for (i, slot) in re.iter_mut().enumerate() {
                *slot = if i < c.frame_len {
                    samples[start + i] * self.window[i]
                } else {
                    T::zero()
                };
            }
            im.fill(T::zero());
            fft_in_place(&mut re, &mut im, false);
            for k in 0..bins {
                power[k] = re[k] * re[k] + im[k] * im[k];
            }

            let log_energies: Vec<T> = self
                .filterbank
                .iter()
                .map(|row| {
                    let energy: T = row.iter().zip(&power).map(|(&w, &p)| w * p).sum();
                    (energy + floor).ln()
                })
                .collect();
            let coeffs = dct::apply_rows(&self.dct, &log_energies);
            values.row2_mut(frame).copy_from_slice(&coeffs);
        }
        Ok(MfccMatrix { values, frame_times })
    }
}

/// Symmetric Hamming window.
fn hamming<T: Scalar>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| {
            let phase = 2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64;
            T::from_f64(0.54 - 0.46 * phase.cos())
        })
        .collect()
}

/// One-shot extraction; builds the tables and discards them.
pub fn mfcc<T: Scalar>(samples: &[T], config: &MfccConfig, sample_rate: u32) -> Result<MfccMatrix<T>, FeatureError> {
    MfccExtractor::new(config.clone(), sample_rate)?.extract(samples)
}
