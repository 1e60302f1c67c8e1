//! From per-second probabilities to alarms: 60-second mean likelihood,
//! threshold Z, firing power over the preictal-time window, threshold Y,
//! refractory period of SPH+SOP after each alarm.
//!
//! Series are undefined until their trailing window fills; the warm-up
//! region carries no values and cannot fire alarms.

use crate::classifier::ProbabilityStream;
use crate::error::{Error, Result};

/// Thresholding and horizon settings for one forecast run.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub smoothing_window_s: usize,
    /// Likelihood threshold (strict >).
    pub z: f64,
    /// Firing-power threshold (strict >).
    pub y: f64,
    pub preictal_minutes: u32,
    pub sph_minutes: f64,
    pub sop_minutes: f64,
}

impl ForecastConfig {
    /// SPH fixed at 5 minutes, SOP at half the preictal time.
    pub fn new(z: f64, y: f64, preictal_minutes: u32) -> Result<Self> {
        let cfg = ForecastConfig {
            smoothing_window_s: 60,
            z,
            y,
            preictal_minutes,
            sph_minutes: 5.0,
            sop_minutes: preictal_minutes as f64 / 2.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z > 0.0 && self.z < 1.0) {
            return Err(Error::invalid(format!("Z must lie in (0, 1), got {}", self.z)));
        }
        if !(self.y > 0.0 && self.y < 1.0) {
            return Err(Error::invalid(format!("Y must lie in (0, 1), got {}", self.y)));
        }
        if self.preictal_minutes == 0 || self.smoothing_window_s == 0 {
            return Err(Error::invalid("window lengths must be positive"));
        }
        if self.sph_minutes < 0.0 || self.sop_minutes <= 0.0 {
            return Err(Error::invalid("SPH must be >= 0 and SOP > 0"));
        }
        Ok(())
    }

    pub fn refractory_s(&self) -> f64 {
        (self.sph_minutes + self.sop_minutes) * 60.0
    }
}

/// A per-second series whose first value sits at stream index `first_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondSeries {
    pub first_index: usize,
    pub values: Vec<f64>,
}

impl SecondSeries {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Stream index of value `k`.
    pub fn index_at(&self, k: usize) -> usize {
        self.first_index + k
    }
}

/// Trailing mean over the last `window_s` probabilities; defined from index
/// `window_s - 1` on. Streams shorter than the window yield an empty series.
pub fn smooth_likelihood(stream: &ProbabilityStream, window_s: usize) -> Result<SecondSeries> {
    if window_s == 0 {
        return Err(Error::invalid("smoothing window must be >= 1"));
    }
    stream.validate()?;
    let n = stream.values.len();
    let mut values = Vec::new();
    if n >= window_s {
        values.reserve(n - window_s + 1);
        // Direct per-index summation: O(n * w) but exact relative to the
        // brute-force oracle, and w is only 60.
        for t in (window_s - 1)..n {
            let sum: f64 = stream.values[t + 1 - window_s..=t].iter().sum();
            values.push(sum / window_s as f64);
        }
    }
    Ok(SecondSeries {
        first_index: window_s - 1,
        values,
    })
}

/// `b_t = 1` iff `L_t > Z` (strict).
pub fn binarize(likelihood: &SecondSeries, z: f64) -> SecondSeries {
    SecondSeries {
        first_index: likelihood.first_index,
        values: likelihood
            .values
            .iter()
            .map(|&l| if l > z { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Trailing mean of the binary series over the last `60 * x_minutes`
/// seconds; defined once the window is full.
pub fn firing_power(binary: &SecondSeries, x_minutes: u32) -> Result<SecondSeries> {
    if x_minutes == 0 {
        return Err(Error::invalid("firing-power window must be >= 1 minute"));
    }
    let w = 60 * x_minutes as usize;
    let n = binary.values.len();
    let mut values = Vec::new();
    if n >= w {
        values.reserve(n - w + 1);
        // Sliding running sum; the series is 0/1 so the sum stays exact.
        let mut sum: f64 = binary.values[..w].iter().sum();
        values.push(sum / w as f64);
        for t in w..n {
            sum += binary.values[t] - binary.values[t - w];
            values.push(sum / w as f64);
        }
    }
    Ok(SecondSeries {
        first_index: binary.first_index + w - 1,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlarmClass {
    TruePositive,
    FalsePositive,
    Unresolved,
}

/// One raised alarm, in stream time.
#[derive(Debug, Clone, PartialEq)]
pub struct AlarmEvent {
    /// Seconds from stream start (end of the firing window).
    pub time_s: f64,
    pub fp_value: f64,
    pub classification: AlarmClass,
}

/// First-crossing alarms with a refractory period of SPH+SOP.
pub fn raise_alarms(fp: &SecondSeries, cfg: &ForecastConfig) -> Result<Vec<AlarmEvent>> {
    cfg.validate()?;
    let refractory = cfg.refractory_s();
    let mut alarms: Vec<AlarmEvent> = Vec::new();
    for (k, &v) in fp.values.iter().enumerate() {
        if v <= cfg.y {
            continue;
        }
        let time_s = (fp.index_at(k) + 1) as f64;
        if let Some(last) = alarms.last() {
            if time_s - last.time_s < refractory {
                continue;
            }
        }
        alarms.push(AlarmEvent {
            time_s,
            fp_value: v,
            classification: AlarmClass::Unresolved,
        });
    }
    Ok(alarms)
}

/// Full chain: probabilities -> likelihood -> binary -> firing power -> alarms.
/// Also returns the likelihood and firing-power traces for reporting.
pub fn forecast_stream(
    stream: &ProbabilityStream,
    cfg: &ForecastConfig,
) -> Result<(SecondSeries, SecondSeries, Vec<AlarmEvent>)> {
    let likelihood = smooth_likelihood(stream, cfg.smoothing_window_s)?;
    let binary = binarize(&likelihood, cfg.z);
    let fp = firing_power(&binary, cfg.preictal_minutes)?;
    let alarms = raise_alarms(&fp, cfg)?;
    Ok((likelihood, fp, alarms))
}

/// Alarms CSV: `time_s,fp_value` with provenance comments.
pub fn save_alarms_csv(
    alarms: &[AlarmEvent],
    stream_start_s: f64,
    path: &std::path::Path,
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "# stream_start_s={stream_start_s}").unwrap();
    writeln!(out, "time_s,fp_value").unwrap();
    for a in alarms {
        writeln!(out, "{},{}", a.time_s, a.fp_value).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
