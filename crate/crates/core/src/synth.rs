//! Synthetic phonocardiogram generators.
//!
//! These signals serve as ground-truth oracles for the segmentation tests
//! and as a separable two-class corpus for end-to-end training tests and
//! demos: class bursts differ only in carrier frequency and noise floor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::preprocess::{Cycle, CYCLE_LEN};
use crate::scalar::Scalar;
use crate::signal_io::Label;

/// Parameters of a two-sound heart beat train.
#[derive(Debug, Clone)]
pub struct ClickTrainSpec {
    pub bpm: f64,
    /// Fraction of the period from S1 onset to S2 onset.
    pub systole_fraction: f64,
    pub s1_freq: f64,
    pub s2_freq: f64,
    pub burst_ms: f64,
    pub s1_amp: f64,
    pub s2_amp: f64,
    pub noise_amp: f64,
    pub seed: u64,
}

impl Default for ClickTrainSpec {
    fn default() -> Self {
        ClickTrainSpec {
            bpm: 72.0,
            systole_fraction: 0.3,
            s1_freq: 50.0,
            s2_freq: 90.0,
            burst_ms: 40.0,
            s1_amp: 1.0,
            s2_amp: 0.6,
            noise_amp: 0.0,
            seed: 0,
        }
    }
}

/// Generates `duration_s` seconds of S1/S2 bursts and returns the signal
/// together with the true S1 onset sample indices.
pub fn click_train<T: Scalar>(spec: &ClickTrainSpec, duration_s: f64, sample_rate: u32) -> (Vec<T>, Vec<usize>) {
    let rate = sample_rate as f64;
    let n = (duration_s * rate).round() as usize;
    let period = (60.0 / spec.bpm * rate).round() as usize;
    let burst_len = (spec.burst_ms / 1000.0 * rate).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut signal = vec![0.0f64; n];
    if spec.noise_amp > 0.0 {
        for v in &mut signal {
            *v = spec.noise_amp * (2.0 * rng.random::<f64>() - 1.0);
        }
    }

    let mut s1_starts = Vec::new();
    let mut beat = 0usize;
    loop {
        let s1 = beat * period;
        if s1 + burst_len >= n {
            break;
        }
        add_burst(&mut signal, s1, burst_len, spec.s1_freq, spec.s1_amp, rate);
        s1_starts.push(s1);
        let s2 = s1 + (spec.systole_fraction * period as f64).round() as usize;
        if s2 + burst_len < n {
            add_burst(&mut signal, s2, burst_len, spec.s2_freq, spec.s2_amp, rate);
        }
        beat += 1;
    }
    (signal.into_iter().map(T::from_f64).collect(), s1_starts)
}

fn add_burst(signal: &mut [f64], start: usize, len: usize, freq: f64, amp: f64, rate: f64) {
    for i in 0..len {
        // Hann-windowed tone burst.
        let window = 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos();
        let t = i as f64 / rate;
        signal[start + i] += amp * window * (2.0 * PI * freq * t).sin();
    }
}

/// Carrier frequencies of the two synthetic classes: slow bursts for
/// Normal, fast noisy bursts for Abnormal.
pub const TOY_NORMAL_FREQ: f64 = 60.0;
pub const TOY_ABNORMAL_FREQ: f64 = 150.0;
const TOY_ABNORMAL_NOISE: f64 = 0.05;

/// One fixed-length cycle of the synthetic two-class problem, at the
/// pipeline rate of 1000 Hz: a loud burst at the cycle start and a softer
/// one at 30% of the cycle, with the carrier set by the class.
pub fn toy_cycle_samples(label: Label, rng: &mut impl Rng) -> Vec<f32> {
    let rate = 1000.0;
    let (freq, noise) = match label {
        Label::Normal => (TOY_NORMAL_FREQ, 0.0),
        Label::Abnormal => (TOY_ABNORMAL_FREQ, TOY_ABNORMAL_NOISE),
    };
    let mut signal = vec![0.0f64; CYCLE_LEN];
    for v in &mut signal {
        if noise > 0.0 {
            *v = noise * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    let burst_len = 120usize;
    add_burst(&mut signal, 0, burst_len, freq, 1.0, rate);
    add_burst(&mut signal, 750, burst_len, freq, 0.6, rate);
    // Small per-cycle jitter so examples are not literally identical.
    let gain = 0.8 + 0.4 * rng.random::<f64>();
    signal.into_iter().map(|v| (v * gain) as f32).collect()
}

/// Balanced synthetic cycle set: `n_per_class` Normal plus `n_per_class`
/// Abnormal cycles, each synthetic patient contributing `cycles_per_patient`.
pub fn toy_cycles(n_per_class: usize, cycles_per_patient: usize, seed: u64) -> Vec<Cycle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cycles = Vec::with_capacity(2 * n_per_class);
    for (label, prefix) in [(Label::Normal, "n"), (Label::Abnormal, "a")] {
        for i in 0..n_per_class {
            let patient = format!("{prefix}{:04}", i / cycles_per_patient);
            cycles.push(Cycle {
                samples: toy_cycle_samples(label, &mut rng),
                patient_id: patient.clone(),
                record_id: patient,
                label,
                cycle_index: (i % cycles_per_patient) as u32,
            });
        }
    }
    cycles
}

/// A whole synthetic recording for one class, suitable for writing to WAV
/// and running through the full pipeline.
pub fn toy_recording<T: Scalar>(label: Label, duration_s: f64, sample_rate: u32, seed: u64) -> Vec<T> {
    let spec = match label {
        Label::Normal => ClickTrainSpec {
            s1_freq: TOY_NORMAL_FREQ,
            s2_freq: TOY_NORMAL_FREQ,
            seed,
            ..ClickTrainSpec::default()
        },
        Label::Abnormal => ClickTrainSpec {
            s1_freq: TOY_ABNORMAL_FREQ,
            s2_freq: TOY_ABNORMAL_FREQ,
            noise_amp: TOY_ABNORMAL_NOISE,
            seed,
            ..ClickTrainSpec::default()
        },
    };
    click_train(&spec, duration_s, sample_rate).0
}
