//! One key-value document holding every stage parameter, with published
//! training-setup values as defaults. Unknown keys are rejected; the
//! canonical serialization is hashed and stamped into every artifact for
//! provenance.

use sha2::{Digest, Sha256};

use crate::encoders::EncoderKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    // filter
    pub filter_low_hz: f64,
    pub filter_high_hz: f64,
    pub filter_order: usize,
    pub notch_hz: f64,
    pub notch_bandwidth_hz: f64,
    pub zero_phase: bool,
    // segmentation
    pub preictal_minutes: u32,
    pub postictal_buffer_min: f64,
    pub balance_seed: u64,
    // encoding
    pub encoder: EncoderKind,
    pub mtf_bins: usize,
    // training
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub momentum: f64,
    pub train_seed: u64,
    pub downsample_factor: usize,
    /// Desk-scale cap on balanced windows per class (0 = unlimited).
    pub max_windows_per_class: usize,
    // forecast
    pub z: f64,
    pub y: f64,
    pub smoothing_window_s: usize,
    pub sph_minutes: f64,
    // grid search
    pub grid_encoders: Vec<EncoderKind>,
    pub grid_preictal_minutes: Vec<u32>,
    // synthetic benchmark
    pub synth_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            filter_low_hz: 0.5,
            filter_high_hz: 100.0,
            filter_order: 4,
            notch_hz: 50.0,
            notch_bandwidth_hz: 2.0,
            zero_phase: false,
            preictal_minutes: 20,
            postictal_buffer_min: 30.0,
            balance_seed: 42,
            encoder: EncoderKind::Rp,
            mtf_bins: 8,
            batch_size: 64,
            learning_rate: 0.001,
            max_epochs: 50,
            momentum: 0.9,
            train_seed: 42,
            downsample_factor: 4,
            max_windows_per_class: 600,
            z: 0.5,
            y: 0.5,
            smoothing_window_s: 60,
            sph_minutes: 5.0,
            grid_encoders: EncoderKind::ALL.to_vec(),
            grid_preictal_minutes: vec![20],
            synth_seed: 42,
        }
    }
}

impl PipelineConfig {
    /// Canonical serialization: sorted `key=value` lines.
    pub fn to_kv(&self) -> String {
        let encs = self
            .grid_encoders
            .iter()
            .map(|e| e.as_str())
            .collect::<Vec<_>>()
            .join(",");
        let pres = self
            .grid_preictal_minutes
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut lines = vec![
            format!("encode.kind={}", self.encoder.as_str()),
            format!("encode.mtf_bins={}", self.mtf_bins),
            format!("filter.high_hz={}", self.filter_high_hz),
            format!("filter.low_hz={}", self.filter_low_hz),
            format!("filter.notch_bandwidth_hz={}", self.notch_bandwidth_hz),
            format!("filter.notch_hz={}", self.notch_hz),
            format!("filter.order={}", self.filter_order),
            format!("filter.zero_phase={}", self.zero_phase),
            format!("forecast.smoothing_window_s={}", self.smoothing_window_s),
            format!("forecast.sph_minutes={}", self.sph_minutes),
            format!("forecast.y={}", self.y),
            format!("forecast.z={}", self.z),
            format!("grid.encoders={encs}"),
            format!("grid.preictal_minutes={pres}"),
            format!("segment.postictal_buffer_min={}", self.postictal_buffer_min),
            format!("segment.preictal_minutes={}", self.preictal_minutes),
            format!("segment.seed={}", self.balance_seed),
            format!("synth.seed={}", self.synth_seed),
            format!("train.batch_size={}", self.batch_size),
            format!("train.downsample_factor={}", self.downsample_factor),
            format!("train.learning_rate={}", self.learning_rate),
            format!("train.max_epochs={}", self.max_epochs),
            format!("train.max_windows_per_class={}", self.max_windows_per_class),
            format!("train.momentum={}", self.momentum),
            format!("train.seed={}", self.train_seed),
        ];
        lines.sort();
        lines.join("\n") + "\n"
    }

    /// Short hex digest of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Apply `key=value` overrides on top of this config.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line without '=': {line:?}")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("bad value {value:?} for config key {key}")))
        }
        match key {
            "filter.low_hz" => self.filter_low_hz = parse(key, value)?,
            "filter.high_hz" => self.filter_high_hz = parse(key, value)?,
            "filter.order" => self.filter_order = parse(key, value)?,
            "filter.notch_hz" => self.notch_hz = parse(key, value)?,
            "filter.notch_bandwidth_hz" => self.notch_bandwidth_hz = parse(key, value)?,
            "filter.zero_phase" => self.zero_phase = parse(key, value)?,
            "segment.preictal_minutes" => self.preictal_minutes = parse(key, value)?,
            "segment.postictal_buffer_min" => self.postictal_buffer_min = parse(key, value)?,
            "segment.seed" => self.balance_seed = parse(key, value)?,
            "encode.kind" => self.encoder = value.parse()?,
            "encode.mtf_bins" => self.mtf_bins = parse(key, value)?,
            "train.batch_size" => self.batch_size = parse(key, value)?,
            "train.learning_rate" => self.learning_rate = parse(key, value)?,
            "train.max_epochs" => self.max_epochs = parse(key, value)?,
            "train.momentum" => self.momentum = parse(key, value)?,
            "train.seed" => self.train_seed = parse(key, value)?,
            "train.downsample_factor" => self.downsample_factor = parse(key, value)?,
            "train.max_windows_per_class" => self.max_windows_per_class = parse(key, value)?,
            "forecast.z" => self.z = parse(key, value)?,
            "forecast.y" => self.y = parse(key, value)?,
            "forecast.smoothing_window_s" => self.smoothing_window_s = parse(key, value)?,
            "forecast.sph_minutes" => self.sph_minutes = parse(key, value)?,
            "grid.encoders" => {
                self.grid_encoders = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?;
            }
            "grid.preictal_minutes" => {
                self.grid_preictal_minutes = value
                    .split(',')
                    .map(|s| parse::<u32>(key, s.trim()))
                    .collect::<Result<_>>()?;
            }
            "synth.seed" => self.synth_seed = parse(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_kv()).map_err(|e| Error::io(path, e))
    }
}
