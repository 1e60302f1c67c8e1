//! Seeded synthetic recordings with annotated seizures and an injected
//! preictal signature, so the full pipeline has verifiable end-to-end
//! behavior at desk scale.
//!
//! The background is seeded broadband noise (lowpass-shaped by a moving
//! average) plus a 10 Hz alpha-band sinusoid. Before each annotated onset a
//! low-frequency rhythm with linearly increasing amplitude is added; the
//! ramp ends exactly at the onset. This is a test fixture, not a
//! physiological claim.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::recording::{Recording, SeizureSplit};

#[derive(Debug, Clone, PartialEq)]
pub struct PreictalSignature {
    /// Peak rhythm amplitude reached at seizure onset.
    pub ramp_amplitude: f64,
    pub rhythm_frequency_hz: f64,
    pub ramp_duration_s: f64,
}

impl Default for PreictalSignature {
    fn default() -> Self {
        PreictalSignature {
            ramp_amplitude: 4.0,
            rhythm_frequency_hz: 3.0,
            ramp_duration_s: 20.0 * 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub broadband_noise_level: f64,
    pub alpha_band_level: f64,
}

impl Default for Background {
    fn default() -> Self {
        Background {
            broadband_noise_level: 0.7,
            alpha_band_level: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub id: String,
    pub duration_s: f64,
    pub fs_hz: f64,
    pub seizure_times_s: Vec<f64>,
    pub seizure_duration_s: f64,
    pub signature: PreictalSignature,
    pub background: Background,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            id: "synth".to_string(),
            duration_s: 3600.0,
            fs_hz: 256.0,
            seizure_times_s: vec![],
            seizure_duration_s: 60.0,
            signature: PreictalSignature::default(),
            background: Background::default(),
            seed: 0,
        }
    }
}

/// Deterministic synthetic recording; a pure function of the config.
pub fn generate_recording(cfg: &SynthConfig) -> Result<Recording> {
    if cfg.duration_s <= 0.0 || cfg.fs_hz <= 0.0 {
        return Err(Error::invalid("duration and sampling rate must be positive"));
    }
    let ramp = cfg.signature.ramp_duration_s;
    let mut prev_end = f64::NEG_INFINITY;
    for &onset in &cfg.seizure_times_s {
        if onset - ramp < prev_end {
            return Err(Error::invalid(format!(
                "preictal ramp before onset {onset} overlaps the previous seizure"
            )));
        }
        if onset + cfg.seizure_duration_s > cfg.duration_s {
            return Err(Error::invalid(format!(
                "seizure at {onset} runs past the recording end"
            )));
        }
        prev_end = onset + cfg.seizure_duration_s;
    }

    let n = (cfg.duration_s * cfg.fs_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(n);

    // Broadband noise, shaped by a short moving average so it is not white.
    let mut noise_state = [0.0f64; 4];
    for i in 0..n {
        let t = i as f64 / cfg.fs_hz;
        noise_state.rotate_right(1);
        noise_state[0] = rng.random::<f64>() * 2.0 - 1.0;
        let shaped: f64 = noise_state.iter().sum::<f64>() / 4.0;
        let mut v = cfg.background.broadband_noise_level * shaped
            + cfg.background.alpha_band_level * (2.0 * PI * 10.0 * t).sin();

        for &onset in &cfg.seizure_times_s {
            let ramp_start = onset - ramp;
            if t >= ramp_start && t < onset {
                let frac = (t - ramp_start) / ramp;
                v += cfg.signature.ramp_amplitude
                    * frac
                    * (2.0 * PI * cfg.signature.rhythm_frequency_hz * t).sin();
            } else if t >= onset && t < onset + cfg.seizure_duration_s {
                // Ictal burst: strong 5 Hz oscillation.
                v += 2.0 * cfg.signature.ramp_amplitude * (2.0 * PI * 5.0 * t).sin();
            }
        }
        samples.push(v);
    }

    let offsets: Vec<f64> = cfg
        .seizure_times_s
        .iter()
        .map(|&on| on + cfg.seizure_duration_s)
        .collect();
    Recording::new(
        cfg.id.clone(),
        "F7",
        cfg.fs_hz,
        samples,
        cfg.seizure_times_s.clone(),
        offsets,
    )
}

/// The default benchmark: one synthetic "patient", five seizures over about
/// eight simulated hours, first three train / last two test.
pub fn benchmark_config(seed: u64) -> SynthConfig {
    SynthConfig {
        id: format!("synth-{seed}"),
        duration_s: 8.0 * 3600.0,
        fs_hz: 256.0,
        // 90 minutes apart; each leaves room for a full 20-minute ramp.
        seizure_times_s: vec![5400.0, 10800.0, 16200.0, 21600.0, 27000.0],
        seizure_duration_s: 60.0,
        signature: PreictalSignature::default(),
        background: Background::default(),
        seed,
    }
}

pub fn make_benchmark_suite(seed: u64) -> Result<(Recording, SeizureSplit)> {
    let cfg = benchmark_config(seed);
    let rec = generate_recording(&cfg)?;
    let split = SeizureSplit::new(rec.id.clone(), vec![0, 1, 2], vec![3, 4], 5)?;
    Ok((rec, split))
}
