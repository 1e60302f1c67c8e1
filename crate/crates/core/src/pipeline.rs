//! End-to-end orchestration: preprocess, segment, encode, train, score the
//! held-out region, and sweep the threshold grid. This is what the CLI's
//! `repro` command and the end-to-end tests run.

use crate::classifier::{
    score_samples, train, CnnModel, ProbabilityStream, TrainConfig, TrainReport,
};
use crate::config::PipelineConfig;
use crate::encoders::{encode_batch, EncodedImage, EncoderKind};
use crate::error::{Error, Result};
use crate::evaluation::{grid_search, GridInput, GridPoint, GridSearchResult, ScoredRegion};
use crate::forecast::ForecastConfig;
use crate::preprocess::{
    apply_filter, apply_filter_zero_phase, design_butterworth_bandpass, design_notch,
    normalize_max_abs,
};
use crate::recording::{Recording, SeizureSplit};
use crate::segmentation::{
    balance_classes, label_intervals_with_buffer, window_interictal, window_preictal,
    IntervalLabeling, SegmentWindow, WindowLabel,
};
use crate::synth::make_benchmark_suite;

/// Bandpass, notch, and max-abs normalization, in that order.
pub fn preprocess_recording(rec: &Recording, cfg: &PipelineConfig) -> Result<Recording> {
    rec.validate()?;
    let fs = rec.sampling_rate_hz;
    let cascade = design_butterworth_bandpass(
        cfg.filter_low_hz,
        cfg.filter_high_hz,
        cfg.filter_order,
        fs,
    )?
    .then(&design_notch(cfg.notch_hz, cfg.notch_bandwidth_hz, fs)?);
    let filtered = if cfg.zero_phase {
        apply_filter_zero_phase(&cascade, &rec.samples)?
    } else {
        apply_filter(&cascade, &rec.samples)?
    };
    let samples = normalize_max_abs(&filtered)?;
    Ok(Recording {
        samples,
        ..rec.clone()
    })
}

/// Region scored for evaluation: from the end of the last training seizure's
/// exclusion zone to the end of the recording, rounded up to a whole second.
pub fn test_region(
    rec: &Recording,
    split: &SeizureSplit,
    postictal_buffer_s: f64,
) -> Result<ScoredRegion> {
    let last_train_offset = split
        .train_indices
        .iter()
        .map(|&i| rec.seizure_offsets_s[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let start_s = (last_train_offset + postictal_buffer_s).ceil();
    if start_s + 1.0 >= rec.duration_s() {
        return Err(Error::invalid(
            "no scorable time after the training seizures",
        ));
    }
    for &i in &split.test_indices {
        if rec.seizure_onsets_s[i] <= start_s {
            return Err(Error::invalid(format!(
                "test seizure {i} lies inside the training region"
            )));
        }
    }
    Ok(ScoredRegion {
        start_s,
        end_s: rec.duration_s(),
    })
}

/// Evenly thin `windows` down to at most `cap` entries (0 = unlimited).
fn thin_evenly(windows: Vec<SegmentWindow>, cap: usize) -> Vec<SegmentWindow> {
    if cap == 0 || windows.len() <= cap {
        return windows;
    }
    (0..cap)
        .map(|i| windows[i * windows.len() / cap].clone())
        .collect()
}

/// Balanced, capped training windows drawn only from the training region:
/// preictal windows of training seizures plus interictal windows that end
/// before the scored region starts.
pub fn training_windows(
    rec: &Recording,
    split: &SeizureSplit,
    labeling: &IntervalLabeling,
    region: &ScoredRegion,
    cfg: &PipelineConfig,
) -> Result<Vec<SegmentWindow>> {
    let fs = rec.sampling_rate_hz;
    let preictal: Vec<SegmentWindow> = window_preictal(labeling, rec)
        .into_iter()
        .filter(|w| matches!(w.source_seizure, Some(s) if split.train_indices.contains(&s)))
        .collect();
    let interictal: Vec<SegmentWindow> = window_interictal(labeling, rec)
        .into_iter()
        .filter(|w| (w.start_sample + w.length) as f64 / fs <= region.start_s)
        .collect();
    let balanced = balance_classes(&preictal, &interictal, cfg.balance_seed)?;

    let (pre, inter): (Vec<_>, Vec<_>) = balanced
        .into_iter()
        .partition(|w| w.label == WindowLabel::Preictal);
    let mut out = thin_evenly(pre, cfg.max_windows_per_class);
    out.extend(thin_evenly(inter, cfg.max_windows_per_class));
    out.sort_by_key(|w| (w.start_sample, w.label == WindowLabel::Preictal));
    Ok(out)
}

/// Encode the sample slices behind `windows` with one encoder.
pub fn encode_windows(
    rec: &Recording,
    windows: &[SegmentWindow],
    kind: EncoderKind,
    mtf_bins: usize,
) -> Result<Vec<EncodedImage>> {
    let slices: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| {
            rec.samples
                .get(w.start_sample..w.start_sample + w.length)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "window at sample {} runs past the recording",
                        w.start_sample
                    ))
                })
        })
        .collect::<Result<_>>()?;
    encode_batch(&slices, kind, mtf_bins)
}

/// Train one classifier on already-encoded windows.
pub fn train_model(
    images: &[EncodedImage],
    windows: &[SegmentWindow],
    input_size: usize,
    cfg: &PipelineConfig,
) -> Result<(CnnModel, TrainReport)> {
    let labels: Vec<WindowLabel> = windows.iter().map(|w| w.label).collect();
    let mut model = crate::classifier::build_model(
        input_size,
        3,
        cfg.downsample_factor,
        cfg.train_seed,
    )?;
    let train_cfg = TrainConfig {
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        max_epochs: cfg.max_epochs,
        momentum: cfg.momentum,
        seed: cfg.train_seed,
        ..TrainConfig::default()
    };
    let report = train(&mut model, images, &labels, &train_cfg)?;
    Ok((model, report))
}

/// Score the scored region second by second.
pub fn score_region(
    model: &CnnModel,
    rec: &Recording,
    region: &ScoredRegion,
    kind: EncoderKind,
    mtf_bins: usize,
) -> Result<ProbabilityStream> {
    let fs = rec.sampling_rate_hz;
    let len = fs.round() as usize;
    let t0 = region.start_s.ceil() as usize;
    let first_sample = t0 * len;
    if first_sample >= rec.samples.len() {
        return Err(Error::invalid("scored region starts past the recording"));
    }
    score_samples(
        model,
        &rec.samples[first_sample..],
        fs,
        kind,
        mtf_bins,
        &rec.id,
        t0 as f64,
    )
}

/// Everything trained and scored for one (encoder, preictal-time) pair.
#[derive(Debug, Clone)]
pub struct TrainedArm {
    pub encoder: EncoderKind,
    pub preictal_minutes: u32,
    pub model: CnnModel,
    pub report: TrainReport,
    pub stream: ProbabilityStream,
    pub training_window_count: usize,
}

#[derive(Debug, Clone)]
pub struct ReproRun {
    pub config_hash: String,
    pub recording_id: String,
    pub arms: Vec<TrainedArm>,
    pub result: GridSearchResult,
}

/// Best-ranked grid point for each encoder, in encoder declaration order.
pub fn best_per_encoder(result: &GridSearchResult) -> Vec<GridPoint> {
    EncoderKind::ALL
        .iter()
        .filter_map(|&kind| {
            result
                .points
                .iter()
                .find(|p| p.encoder == kind)
                .cloned()
        })
        .collect()
}

/// Train, score, and grid-search every configured (encoder, preictal) pair
/// on an already-preprocessed recording.
pub fn run_pipeline(
    rec: &Recording,
    split: &SeizureSplit,
    cfg: &PipelineConfig,
) -> Result<ReproRun> {
    let buffer_s = cfg.postictal_buffer_min * 60.0;
    let region = test_region(rec, split, buffer_s)?;
    let input_size = rec.sampling_rate_hz.round() as usize;
    let test_onsets: Vec<f64> = split
        .test_indices
        .iter()
        .map(|&i| rec.seizure_onsets_s[i])
        .collect();

    let mut arms = Vec::new();
    let mut inputs = Vec::new();
    for &preictal_minutes in &cfg.grid_preictal_minutes {
        ForecastConfig::new(cfg.z, cfg.y, preictal_minutes)?;
        let labeling = label_intervals_with_buffer(rec, preictal_minutes, buffer_s)?;
        let windows = training_windows(rec, split, &labeling, &region, cfg)?;
        for &encoder in &cfg.grid_encoders {
            let images = encode_windows(rec, &windows, encoder, cfg.mtf_bins)?;
            let (model, report) = train_model(&images, &windows, input_size, cfg)?;
            let stream = score_region(&model, rec, &region, encoder, cfg.mtf_bins)?;
            inputs.push(GridInput {
                encoder,
                preictal_minutes,
                stream: stream.clone(),
                onsets_s: test_onsets.clone(),
                labeling: labeling.clone(),
                region,
            });
            arms.push(TrainedArm {
                encoder,
                preictal_minutes,
                model,
                report,
                stream,
                training_window_count: windows.len(),
            });
        }
    }

    Ok(ReproRun {
        config_hash: cfg.hash(),
        recording_id: rec.id.clone(),
        arms,
        result: grid_search(&inputs)?,
    })
}

/// Reduced-scale defaults for the seeded synthetic reproduction: a coarser
/// CNN input, a capped training set, and a single preictal time, so the full
/// three-encoder run finishes in minutes on a laptop.
pub fn repro_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        synth_seed: seed,
        downsample_factor: 8,
        max_windows_per_class: 600,
        grid_preictal_minutes: vec![20],
        ..PipelineConfig::default()
    }
}

/// The seeded synthetic benchmark, end to end.
pub fn run_repro(cfg: &PipelineConfig) -> Result<(Recording, ReproRun)> {
    let (raw, split) = make_benchmark_suite(cfg.synth_seed)?;
    let rec = preprocess_recording(&raw, cfg)?;
    let run = run_pipeline(&rec, &split, cfg)?;
    Ok((rec, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::label_intervals_with_buffer;
    use crate::synth::{PreictalSignature, SynthConfig};

    fn small_recording() -> (Recording, SeizureSplit) {
        let cfg = SynthConfig {
            id: "pipe".into(),
            duration_s: 1500.0,
            fs_hz: 64.0,
            seizure_times_s: vec![300.0, 700.0, 1200.0],
            seizure_duration_s: 20.0,
            signature: PreictalSignature {
                ramp_duration_s: 120.0,
                ..PreictalSignature::default()
            },
            ..SynthConfig::default()
        };
        let rec = crate::synth::generate_recording(&cfg).unwrap();
        let split = SeizureSplit::new("pipe", vec![0, 1], vec![2], 3).unwrap();
        (rec, split)
    }

    fn small_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.apply_kv(concat!(
            "filter.high_hz=28\n",
            "filter.notch_hz=25\n",
            "segment.preictal_minutes=2\n",
            "segment.postictal_buffer_min=1.5\n",
            "grid.preictal_minutes=2\n",
            "train.downsample_factor=2\n",
            "train.max_windows_per_class=40\n",
            "train.max_epochs=2\n",
        ))
        .unwrap();
        cfg
    }

    #[test]
    fn preprocess_is_deterministic_and_normalized() {
        let (rec, _) = small_recording();
        let cfg = small_config();
        let a = preprocess_recording(&rec, &cfg).unwrap();
        let b = preprocess_recording(&rec, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        let max = a.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((max - 1.0).abs() < 1e-12);
        assert_eq!(a.seizure_onsets_s, rec.seizure_onsets_s);
    }

    #[test]
    fn test_region_starts_after_training_exclusion() {
        let (rec, split) = small_recording();
        let region = test_region(&rec, &split, 90.0).unwrap();
        assert_eq!(region.start_s, 810.0); // offset 720 + 90
        assert_eq!(region.end_s, 1500.0);
        // A buffer so long it swallows the recording is rejected.
        assert!(test_region(&rec, &split, 1000.0).is_err());
    }

    #[test]
    fn training_windows_stay_out_of_the_test_region() {
        let (rec, split) = small_recording();
        let cfg = small_config();
        let labeling = label_intervals_with_buffer(&rec, 2, 90.0).unwrap();
        let region = test_region(&rec, &split, 90.0).unwrap();
        let windows = training_windows(&rec, &split, &labeling, &region, &cfg).unwrap();
        assert!(!windows.is_empty());
        let n_pre = windows
            .iter()
            .filter(|w| w.label == WindowLabel::Preictal)
            .count();
        assert_eq!(n_pre * 2, windows.len());
        assert!(n_pre <= cfg.max_windows_per_class);
        for w in &windows {
            let end_t = (w.start_sample + w.length) as f64 / rec.sampling_rate_hz;
            assert!(end_t <= region.start_s + 1e-9);
            if let (WindowLabel::Preictal, Some(s)) = (w.label, w.source_seizure) {
                assert!(split.train_indices.contains(&s));
            }
        }
    }

    #[test]
    fn thin_evenly_spreads_and_caps() {
        let (rec, _) = small_recording();
        let labeling = label_intervals_with_buffer(&rec, 2, 90.0).unwrap();
        let all = window_interictal(&labeling, &rec);
        let thinned = thin_evenly(all.clone(), 5);
        assert_eq!(thinned.len(), 5);
        assert_eq!(thinned[0], all[0]);
        assert!(thinned.windows(2).all(|p| p[0].start_sample < p[1].start_sample));
        assert_eq!(thin_evenly(all.clone(), 0).len(), all.len());
    }

    #[test]
    fn pipeline_produces_streams_and_a_ranked_grid() {
        let (raw, split) = small_recording();
        let cfg = small_config();
        let rec = preprocess_recording(&raw, &cfg).unwrap();
        let run = run_pipeline(&rec, &split, &cfg).unwrap();
        assert_eq!(run.arms.len(), 3);
        assert_eq!(run.result.points.len(), 3 * 18 * 8);
        for arm in &run.arms {
            assert_eq!(arm.stream.values.len(), 1500 - 810);
            assert!((arm.stream.start_time_s - 810.0).abs() < 1e-12);
        }
        assert_eq!(best_per_encoder(&run.result).len(), 3);
        // Determinism across a full re-run.
        let again = run_pipeline(&rec, &split, &cfg).unwrap();
        assert_eq!(run.arms[0].stream.values, again.arms[0].stream.values);
        assert_eq!(run.result.points, again.result.points);
    }
}
