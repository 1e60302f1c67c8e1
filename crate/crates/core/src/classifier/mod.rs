//! The per-image probability source: a compact trainable CNN with a
//! two-class softmax head, plus an adapter for externally computed
//! probability streams.

pub mod net;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoders::{encode_window, quantize_to_image, EncodedImage, EncoderKind};
use crate::error::{Error, Result};
use crate::recording::Recording;
use crate::segmentation::WindowLabel;

use net::Shapes;

pub const PREICTAL_CLASS: usize = 1;

/// Mini-batch gradient-descent settings. Defaults follow the original
/// training setup: batch 64, learning rate 0.001, 50 epochs, momentum 0.9.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub momentum: f64,
    pub seed: u64,
    /// Consecutive epochs with loss improvement below `early_stop_min_delta`
    /// before training stops.
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.001,
            max_epochs: 50,
            momentum: 0.9,
            seed: 0,
            early_stop_patience: 5,
            early_stop_min_delta: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::invalid("learning rate must be non-negative"));
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) compact CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub input_size: usize,
    pub channels: usize,
    pub downsample: usize,
    pub rng_seed: u64,
    pub params: Vec<f64>,
}

impl CnnModel {
    pub fn shapes(&self) -> Shapes {
        // Construction validated the dims, so this cannot fail.
        Shapes::for_input(self.input_size, self.channels, self.downsample).unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// Deterministically initialized model with seeded uniform fan-in scaling.
pub fn build_model(input_size: usize, channels: usize, downsample: usize, seed: u64) -> Result<CnnModel> {
    let shapes = Shapes::for_input(input_size, channels, downsample)?;
    let off = shapes.offsets();
    let mut params = vec![0.0; shapes.param_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut init = |range: std::ops::Range<usize>, fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for p in &mut params[range] {
            *p = rng.random_range(-bound..bound);
        }
    };
    init(off.c1w..off.c1b, net::CONV1_KERNEL * net::CONV1_KERNEL * channels);
    init(off.c2w..off.c2b, net::CONV2_KERNEL * net::CONV2_KERNEL * net::CONV1_FILTERS);
    init(off.fcw..off.fcb, shapes.flat);
    // Biases stay zero.

    Ok(CnnModel {
        input_size,
        channels,
        downsample,
        rng_seed: seed,
        params,
    })
}

/// Interleaved [0,1] pixel values, then the downsampling average pool.
pub fn image_to_input(img: &EncodedImage, shapes: &Shapes) -> Result<Vec<f64>> {
    if img.size != shapes.input_size {
        return Err(Error::invalid(format!(
            "image size {} does not match model input {}",
            img.size, shapes.input_size
        )));
    }
    let pixels01: Vec<f64> = img.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Ok(net::downsample_input(&pixels01, shapes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Per-epoch (mean cross-entropy loss, accuracy).
    pub epochs: Vec<(f64, f64)>,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
}

/// Mini-batch gradient descent with momentum; epoch-shuffled with a seeded
/// RNG, bit-reproducible for a fixed (seed, config, dataset order).
pub fn train(
    model: &mut CnnModel,
    images: &[EncodedImage],
    labels: &[WindowLabel],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if images.len() != labels.len() {
        return Err(Error::invalid("image/label count mismatch"));
    }
    let shapes = model.shapes();
    let inputs: Vec<Vec<f64>> = images
        .iter()
        .map(|img| image_to_input(img, &shapes))
        .collect::<Result<_>>()?;
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| match l {
            WindowLabel::Preictal => PREICTAL_CLASS,
            WindowLabel::Interictal => 1 - PREICTAL_CLASS,
        })
        .collect();

    let mut warnings = Vec::new();
    let n_pre = targets.iter().filter(|&&t| t == PREICTAL_CLASS).count();
    if n_pre == 0 || n_pre == targets.len() {
        warnings.push("training set contains a single class".to_string());
    } else if n_pre * 2 != targets.len() {
        warnings.push(format!(
            "unbalanced classes: {} preictal vs {} interictal",
            n_pre,
            targets.len() - n_pre
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity = vec![0.0; model.params.len()];
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epochs = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut stall = 0;
    let mut stopped_early = false;

    for _epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &idx in batch {
                let cache = net::forward(&model.params, &inputs[idx], &shapes);
                loss_sum += net::loss_of(&cache, targets[idx]);
                let predicted = usize::from(cache.probs[1] > cache.probs[0]);
                correct += usize::from(predicted == targets[idx]);
                net::backward(&model.params, &inputs[idx], &cache, targets[idx], &shapes, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            for i in 0..model.params.len() {
                velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i] * scale;
                model.params[i] += velocity[i];
            }
        }
        let epoch_loss = loss_sum / inputs.len() as f64;
        let accuracy = correct as f64 / inputs.len() as f64;
        epochs.push((epoch_loss, accuracy));

        if best_loss - epoch_loss < cfg.early_stop_min_delta {
            stall += 1;
            if stall >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        } else {
            stall = 0;
        }
        best_loss = best_loss.min(epoch_loss);
    }

    Ok(TrainReport {
        epochs,
        stopped_early,
        warnings,
    })
}

/// Softmax probability of the preictal class for one image.
pub fn predict_proba(model: &CnnModel, img: &EncodedImage) -> Result<f64> {
    let shapes = model.shapes();
    let input = image_to_input(img, &shapes)?;
    let cache = net::forward(&model.params, &input, &shapes);
    Ok(cache.probs[PREICTAL_CLASS])
}

/// Compare analytic gradients against central finite differences on up to
/// `max_coords` seeded parameter coordinates; returns the max relative error.
pub fn gradient_check(
    model: &CnnModel,
    img: &EncodedImage,
    label: WindowLabel,
    epsilon: f64,
    max_coords: usize,
    seed: u64,
) -> Result<f64> {
    let shapes = model.shapes();
    let input = image_to_input(img, &shapes)?;
    let target = match label {
        WindowLabel::Preictal => PREICTAL_CLASS,
        WindowLabel::Interictal => 1 - PREICTAL_CLASS,
    };

    let mut grad = vec![0.0; model.params.len()];
    let cache = net::forward(&model.params, &input, &shapes);
    net::backward(&model.params, &input, &cache, target, &shapes, &mut grad);

    let mut coords: Vec<usize> = (0..model.params.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    coords.shuffle(&mut rng);
    coords.truncate(max_coords);

    let mut params = model.params.clone();
    let mut max_rel = 0.0f64;
    for &i in &coords {
        let orig = params[i];
        params[i] = orig + epsilon;
        let lp = net::loss_of(&net::forward(&params, &input, &shapes), target);
        params[i] = orig - epsilon;
        let lm = net::loss_of(&net::forward(&params, &input, &shapes), target);
        params[i] = orig;
        let numeric = (lp - lm) / (2.0 * epsilon);
        let analytic = grad[i];
        let denom = analytic.abs().max(numeric.abs());
        if denom > 1e-8 {
            max_rel = max_rel.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(max_rel)
}

/// Where a probability stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamSource {
    InternalCnn,
    External,
}

/// Per-second p(preictal) values aligned to recording time; `values[k]`
/// covers the window ending at `start_time_s + k + 1` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityStream {
    pub recording_id: String,
    pub start_time_s: f64,
    pub values: Vec<f64>,
    pub source: StreamSource,
}

impl ProbabilityStream {
    pub fn validate(&self) -> Result<()> {
        for (i, &p) in self.values.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "probability {p} at second {i} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "# recording_id={}", self.recording_id).unwrap();
        writeln!(out, "# start_time_s={}", self.start_time_s).unwrap();
        let source = match self.source {
            StreamSource::InternalCnn => "internal_cnn",
            StreamSource::External => "external",
        };
        writeln!(out, "# source={source}").unwrap();
        writeln!(out, "second_index,p_preictal").unwrap();
        for (i, p) in self.values.iter().enumerate() {
            writeln!(out, "{i},{p}").unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Load a probability stream CSV (`second_index,p_preictal`); rejects gaps
/// and out-of-range probabilities. Streams without provenance comments are
/// tagged as external.
pub fn load_probability_stream(path: &std::path::Path) -> Result<ProbabilityStream> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut recording_id = String::from("external");
    let mut start_time_s = 0.0;
    let mut source = StreamSource::External;
    let mut values = Vec::new();
    let mut expected = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.trim().split_once('=') {
                match key.trim() {
                    "recording_id" => recording_id = value.trim().to_string(),
                    "start_time_s" => {
                        start_time_s = value.trim().parse().map_err(|_| {
                            Error::format("probability stream", path, "bad start_time_s")
                        })?
                    }
                    "source" => {
                        source = match value.trim() {
                            "internal_cnn" => StreamSource::InternalCnn,
                            _ => StreamSource::External,
                        }
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.starts_with("second_index") {
            continue;
        }
        let (idx, p) = line.split_once(',').ok_or_else(|| {
            Error::format("probability stream", path, format!("bad line {line:?}"))
        })?;
        let idx: usize = idx.trim().parse().map_err(|_| {
            Error::format("probability stream", path, format!("bad index {idx:?}"))
        })?;
        if idx != expected {
            return Err(Error::format(
                "probability stream",
                path,
                format!("gap at {expected}"),
            ));
        }
        let p: f64 = p.trim().parse().map_err(|_| {
            Error::format("probability stream", path, format!("bad probability {p:?}"))
        })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::format(
                "probability stream",
                path,
                format!("probability {p} outside [0, 1] at second {idx}"),
            ));
        }
        values.push(p);
        expected += 1;
    }
    if values.is_empty() {
        return Err(Error::format("probability stream", path, "no values"));
    }
    Ok(ProbabilityStream {
        recording_id,
        start_time_s,
        values,
        source,
    })
}

/// Score a sample slice: one probability per non-overlapping one-second
/// window, in order. `start_time_s` is the recording time of the slice start.
pub fn score_samples(
    model: &CnnModel,
    samples: &[f64],
    fs_hz: f64,
    kind: EncoderKind,
    mtf_bins: usize,
    recording_id: &str,
    start_time_s: f64,
) -> Result<ProbabilityStream> {
    let len = fs_hz.round() as usize;
    if samples.len() < len {
        return Err(Error::invalid("recording shorter than one second"));
    }
    let n = samples.len() / len;
    let shapes = model.shapes();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let w = &samples[k * len..(k + 1) * len];
            let img = quantize_to_image(&encode_window(w, kind, mtf_bins)?)?;
            let input = image_to_input(&img, &shapes)?;
            Ok(net::forward(&model.params, &input, &shapes).probs[PREICTAL_CLASS])
        })
        .collect::<Result<_>>()?;
    Ok(ProbabilityStream {
        recording_id: recording_id.to_string(),
        start_time_s,
        values,
        source: StreamSource::InternalCnn,
    })
}

/// Score a whole preprocessed recording.
pub fn score_recording(
    model: &CnnModel,
    rec: &Recording,
    kind: EncoderKind,
    mtf_bins: usize,
) -> Result<ProbabilityStream> {
    score_samples(model, &rec.samples, rec.sampling_rate_hz, kind, mtf_bins, &rec.id, 0.0)
}

const MODEL_MAGIC: &[u8; 8] = b"ICTUSMDL";
const MODEL_VERSION: u8 = 1;

pub fn save_model(model: &CnnModel, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&[MODEL_VERSION])?;
        w.write_all(&(model.input_size as u32).to_le_bytes())?;
        w.write_all(&(model.channels as u32).to_le_bytes())?;
        w.write_all(&(model.downsample as u32).to_le_bytes())?;
        w.write_all(&model.rng_seed.to_le_bytes())?;
        w.write_all(&(model.params.len() as u64).to_le_bytes())?;
        for p in &model.params {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &std::path::Path) -> Result<CnnModel> {
    use std::io::Read;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let mut header = [0u8; 9];
    r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    if &header[0..8] != MODEL_MAGIC || header[8] != MODEL_VERSION {
        return Err(Error::format("model file", path, "bad magic or version"));
    }
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u32b).map_err(|e| Error::io(path, e))?;
    let input_size = u32::from_le_bytes(u32b) as usize;
    r.read_exact(&mut u32b).map_err(|e| Error::io(path, e))?;
    let channels = u32::from_le_bytes(u32b) as usize;
    r.read_exact(&mut u32b).map_err(|e| Error::io(path, e))?;
    let downsample = u32::from_le_bytes(u32b) as usize;
    r.read_exact(&mut u64b).map_err(|e| Error::io(path, e))?;
    let rng_seed = u64::from_le_bytes(u64b);
    r.read_exact(&mut u64b).map_err(|e| Error::io(path, e))?;
    let count = u64::from_le_bytes(u64b) as usize;
    let shapes = Shapes::for_input(input_size, channels, downsample)
        .map_err(|e| Error::format("model file", path, e.to_string()))?;
    if count != shapes.param_count() {
        return Err(Error::format(
            "model file",
            path,
            format!("expected {} parameters, found {count}", shapes.param_count()),
        ));
    }
    let mut params = Vec::with_capacity(count);
    let mut f64b = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut f64b).map_err(|e| Error::io(path, e))?;
        params.push(f64::from_le_bytes(f64b));
    }
    Ok(CnnModel {
        input_size,
        channels,
        downsample,
        rng_seed,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_image(size: usize, gray: u8) -> EncodedImage {
        EncodedImage {
            kind: EncoderKind::Rp,
            size,
            pixels: vec![gray; size * size * 3],
        }
    }

    /// 200 trivially separable images: dark class 0, bright class 1.
    fn separable_set(size: usize) -> (Vec<EncodedImage>, Vec<WindowLabel>) {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            if i % 2 == 0 {
                images.push(flat_image(size, 20 + (i % 10) as u8));
                labels.push(WindowLabel::Interictal);
            } else {
                images.push(flat_image(size, 220 + (i % 10) as u8));
                labels.push(WindowLabel::Preictal);
            }
        }
        (images, labels)
    }

    #[test]
    fn build_is_seed_deterministic() {
        let a = build_model(64, 3, 2, 42).unwrap();
        let b = build_model(64, 3, 2, 42).unwrap();
        assert_eq!(a.params, b.params);
        let c = build_model(64, 3, 2, 43).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn incompatible_dims_rejected() {
        // 17x17 survives no pooling stride.
        assert!(build_model(17, 3, 1, 0).is_err());
        assert!(build_model(64, 3, 3, 0).is_err());
    }

    #[test]
    fn zeroed_final_layer_gives_half() {
        let mut model = build_model(32, 3, 2, 7).unwrap();
        let off = model.shapes().offsets();
        for p in &mut model.params[off.fcw..] {
            *p = 0.0;
        }
        let p = predict_proba(&model, &flat_image(32, 100)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_outputs_complement() {
        let model = build_model(32, 3, 2, 3).unwrap();
        for gray in [0u8, 90, 255] {
            let p = predict_proba(&model, &flat_image(32, gray)).unwrap();
            assert!((0.0..=1.0).contains(&p));
            // p_interictal = 1 - p_preictal by construction of the softmax.
            let shapes = model.shapes();
            let input = image_to_input(&flat_image(32, gray), &shapes).unwrap();
            let cache = net::forward(&model.params, &input, &shapes);
            assert!((cache.probs[0] + cache.probs[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dim_mismatch_rejected() {
        let model = build_model(32, 3, 2, 3).unwrap();
        assert!(predict_proba(&model, &flat_image(16, 0)).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut model = build_model(32, 3, 2, 1).unwrap();
        let before = model.params.clone();
        let (images, labels) = separable_set(32);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 2,
            seed: 5,
            ..TrainConfig::default()
        };
        train(&mut model, &images, &labels, &cfg).unwrap();
        assert_eq!(model.params, before);
    }

    #[test]
    fn separable_toy_trains_to_high_accuracy() {
        let mut model = build_model(32, 3, 2, 11).unwrap();
        let (images, labels) = separable_set(32);
        let cfg = TrainConfig {
            max_epochs: 10,
            learning_rate: 0.01,
            seed: 11,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &images, &labels, &cfg).unwrap();
        let first = report.epochs.first().unwrap().0;
        let last = report.epochs.last().unwrap();
        assert!(
            last.0 <= 0.5 * first,
            "loss went {first} -> {} over {} epochs",
            last.0,
            report.epochs.len()
        );
        assert!(last.1 >= 0.95, "final accuracy {}", last.1);
    }

    #[test]
    fn single_image_trains_and_loss_decreases() {
        let mut model = build_model(32, 3, 2, 2).unwrap();
        let images = vec![flat_image(32, 200)];
        let labels = vec![WindowLabel::Preictal];
        let cfg = TrainConfig {
            max_epochs: 5,
            learning_rate: 0.05,
            seed: 2,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &images, &labels, &cfg).unwrap();
        assert!(report.epochs.last().unwrap().0 < report.epochs[0].0);
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (images, labels) = separable_set(32);
        let cfg = TrainConfig {
            max_epochs: 3,
            seed: 9,
            ..TrainConfig::default()
        };
        let mut a = build_model(32, 3, 2, 9).unwrap();
        train(&mut a, &images, &labels, &cfg).unwrap();
        let mut b = build_model(32, 3, 2, 9).unwrap();
        train(&mut b, &images, &labels, &cfg).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = build_model(32, 3, 2, 17).unwrap();
        // A structured image exercises every layer.
        let mut pixels = vec![0u8; 32 * 32 * 3];
        for i in 0..32 {
            for j in 0..32 {
                let v = ((i * 8 + j * 5) % 256) as u8;
                for c in 0..3 {
                    pixels[(i * 32 + j) * 3 + c] = v;
                }
            }
        }
        let img = EncodedImage {
            kind: EncoderKind::Gaf,
            size: 32,
            pixels,
        };
        // Epsilon small enough that the probe stays on one side of the
        // maxpool/ReLU kinks this image happens to sit near.
        let err = gradient_check(&model, &img, WindowLabel::Preictal, 1e-4, 200, 1).unwrap();
        assert!(err < 1e-4, "max relative gradient error {err}");
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        let model = build_model(32, 3, 2, 21).unwrap();
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn scoring_counts_and_determinism() {
        // fs = 16 keeps windows (and hence images) small.
        let fs = 16.0;
        let samples: Vec<f64> = (0..(16 * 120)).map(|i| ((i as f64) * 0.13).sin()).collect();
        let rec = Recording::new("s", "F7", fs, samples, vec![], vec![]).unwrap();
        let model = build_model(16, 3, 1, 4).unwrap();
        let a = score_recording(&model, &rec, EncoderKind::Rp, 8).unwrap();
        assert_eq!(a.values.len(), 120);
        assert!(a.values.iter().all(|p| (0.0..=1.0).contains(p)));
        let b = score_recording(&model, &rec, EncoderKind::Rp, 8).unwrap();
        assert_eq!(a, b);
        // Per-window scoring matches the batched path.
        let img = quantize_to_image(
            &encode_window(&rec.samples[0..16], EncoderKind::Rp, 8).unwrap(),
        )
        .unwrap();
        assert_eq!(a.values[0], predict_proba(&model, &img).unwrap());
    }

    #[test]
    fn too_short_recording_rejected() {
        let rec = Recording::new("s", "F7", 256.0, vec![0.5; 100], vec![], vec![]).unwrap();
        let model = build_model(256, 3, 4, 0).unwrap();
        assert!(score_recording(&model, &rec, EncoderKind::Rp, 8).is_err());
    }

    #[test]
    fn stream_csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let stream = ProbabilityStream {
            recording_id: "r1".into(),
            start_time_s: 30.0,
            values: vec![0.1, 0.5, 0.9],
            source: StreamSource::InternalCnn,
        };
        stream.save_csv(&path).unwrap();
        assert_eq!(load_probability_stream(&path).unwrap(), stream);

        std::fs::write(&path, "0,0.5\n1,1.2\n").unwrap();
        let err = load_probability_stream(&path).unwrap_err();
        assert!(err.to_string().contains("outside [0, 1]"), "{err}");

        std::fs::write(&path, "0,0.5\n1,0.5\n2,0.5\n3,0.5\n4,0.5\n6,0.5\n").unwrap();
        let err = load_probability_stream(&path).unwrap_err();
        assert!(err.to_string().contains("gap at 5"), "{err}");
    }
}
