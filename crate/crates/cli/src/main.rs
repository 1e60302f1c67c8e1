//! `ictus`: single entry point for the forecasting pipeline. Every
//! subcommand starts from the default config, applies an optional config
//! file, then applies command-line flags on top.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ictus_core::classifier::{
    load_model, load_probability_stream, save_model, score_samples,
};
use ictus_core::config::PipelineConfig;
use ictus_core::encoders::{write_ppm, EncoderKind, ImageSet};
use ictus_core::evaluation::{grid_search, save_report_csv, GridInput};
use ictus_core::forecast::{forecast_stream, save_alarms_csv, ForecastConfig};
use ictus_core::pipeline::{
    best_per_encoder, encode_windows, preprocess_recording, repro_config, run_repro, test_region,
    train_model,
};
use ictus_core::recording::{Recording, RecordingFormat, SeizureSplit};
use ictus_core::segmentation::{
    balance_classes, label_intervals_with_buffer, window_interictal, window_preictal, WindowSet,
};
use ictus_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ictus", version, about = "Single-channel EEG seizure forecasting")]
struct Cli {
    /// Key-value config file applied before any flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bandpass + notch filter a recording.
    Filter {
        #[arg(long)]
        low: Option<f64>,
        #[arg(long)]
        high: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        notch: Option<f64>,
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Filter forward and backward (zero phase).
        #[arg(long)]
        zero_phase: bool,
        input: PathBuf,
        output: PathBuf,
    },
    /// Label, window, and class-balance a recording into a window set.
    Segment {
        #[arg(long = "preictal-min")]
        preictal_min: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "buffer-min")]
        buffer_min: Option<f64>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Encode a window set into quantized images.
    Encode {
        #[arg(long)]
        kind: Option<EncoderKind>,
        #[arg(long)]
        bins: Option<usize>,
        /// Recording the windows index into.
        #[arg(long)]
        recording: PathBuf,
        /// Also export every image as a P6 pixmap into this directory.
        #[arg(long)]
        ppm: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Train the classifier on an encoded image set.
    Train {
        /// Window set supplying the labels, in image order.
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        downsample: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Score a recording second by second with a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        kind: Option<EncoderKind>,
        #[arg(long)]
        bins: Option<usize>,
        /// First scored second (default 0).
        #[arg(long = "start-s")]
        start_s: Option<f64>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Turn a probability stream into alarms.
    Forecast {
        #[arg(long = "Z")]
        z: Option<f64>,
        #[arg(long = "Y")]
        y: Option<f64>,
        #[arg(long = "preictal-min")]
        preictal_min: Option<u32>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Sweep the threshold grid over pre-scored streams.
    Search {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// Directory holding `<encoder>-<preictal>.csv` probability streams.
        #[arg(long)]
        streams: PathBuf,
        /// Comma-separated encoder subset.
        #[arg(long)]
        encoders: Option<String>,
        /// Comma-separated preictal minutes.
        #[arg(long)]
        preictal: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit per-second likelihood and firing-power traces for one stream.
    Report {
        #[arg(long = "Z")]
        z: Option<f64>,
        #[arg(long = "Y")]
        y: Option<f64>,
        #[arg(long = "preictal-min")]
        preictal_min: Option<u32>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Generate the seeded synthetic benchmark recording and split.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce the synthetic benchmark end to end.
    Repro {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "repro-out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io { .. } => 1,
                _ => 2,
            })
        }
    }
}

fn base_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_recording(path: &Path) -> Result<Recording> {
    Recording::load(path, RecordingFormat::from_path(path))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli.config)?;
    match cli.cmd {
        Cmd::Filter {
            low,
            high,
            order,
            notch,
            bandwidth,
            zero_phase,
            input,
            output,
        } => {
            if let Some(v) = low {
                cfg.filter_low_hz = v;
            }
            if let Some(v) = high {
                cfg.filter_high_hz = v;
            }
            if let Some(v) = order {
                cfg.filter_order = v;
            }
            if let Some(v) = notch {
                cfg.notch_hz = v;
            }
            if let Some(v) = bandwidth {
                cfg.notch_bandwidth_hz = v;
            }
            cfg.zero_phase |= zero_phase;
            let rec = load_recording(&input)?;
            let out = preprocess_recording(&rec, &cfg)?;
            out.save(&output, RecordingFormat::from_path(&output))?;
            println!(
                "filtered {} ({} samples) -> {}",
                rec.id,
                rec.samples.len(),
                output.display()
            );
        }
        Cmd::Segment {
            preictal_min,
            seed,
            buffer_min,
            input,
            output,
        } => {
            if let Some(v) = preictal_min {
                cfg.preictal_minutes = v;
            }
            if let Some(v) = seed {
                cfg.balance_seed = v;
            }
            if let Some(v) = buffer_min {
                cfg.postictal_buffer_min = v;
            }
            let rec = load_recording(&input)?;
            let labeling =
                label_intervals_with_buffer(&rec, cfg.preictal_minutes, cfg.postictal_buffer_min * 60.0)?;
            for &s in &labeling.seizures_without_preictal {
                eprintln!("warning: seizure {s} has no usable preictal interval");
            }
            let pre = window_preictal(&labeling, &rec);
            let inter = window_interictal(&labeling, &rec);
            let windows = balance_classes(&pre, &inter, cfg.balance_seed)?;
            let set = WindowSet {
                recording_id: rec.id.clone(),
                window_length: rec.sampling_rate_hz.round() as usize,
                config_hash: cfg.hash(),
                windows,
            };
            set.save(&output)?;
            println!(
                "{} balanced windows ({} per class) -> {}",
                set.windows.len(),
                set.windows.len() / 2,
                output.display()
            );
        }
        Cmd::Encode {
            kind,
            bins,
            recording,
            ppm,
            input,
            output,
        } => {
            if let Some(v) = kind {
                cfg.encoder = v;
            }
            if let Some(v) = bins {
                cfg.mtf_bins = v;
            }
            let rec = load_recording(&recording)?;
            let set = WindowSet::load(&input)?;
            if set.recording_id != rec.id {
                return Err(Error::invalid(format!(
                    "window set belongs to recording {:?}, not {:?}",
                    set.recording_id, rec.id
                )));
            }
            let images = encode_windows(&rec, &set.windows, cfg.encoder, cfg.mtf_bins)?;
            let size = images.first().map_or(0, |i| i.size);
            if let Some(dir) = &ppm {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                for (i, img) in images.iter().enumerate() {
                    write_ppm(img, &dir.join(format!("{:05}.ppm", i)))?;
                }
            }
            let imgset = ImageSet {
                kind: cfg.encoder,
                size,
                config_hash: cfg.hash(),
                images,
            };
            imgset.save(&output)?;
            println!(
                "{} {} images ({size}x{size}) -> {}",
                imgset.images.len(),
                cfg.encoder.as_str(),
                output.display()
            );
        }
        Cmd::Train {
            windows,
            downsample,
            seed,
            epochs,
            input,
            output,
        } => {
            if let Some(v) = downsample {
                cfg.downsample_factor = v;
            }
            if let Some(v) = seed {
                cfg.train_seed = v;
            }
            if let Some(v) = epochs {
                cfg.max_epochs = v;
            }
            let imgset = ImageSet::load(&input)?;
            let set = WindowSet::load(&windows)?;
            if imgset.images.len() != set.windows.len() {
                return Err(Error::invalid(format!(
                    "{} images but {} windows",
                    imgset.images.len(),
                    set.windows.len()
                )));
            }
            let (model, report) = train_model(&imgset.images, &set.windows, imgset.size, &cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            save_model(&model, &output)?;
            let (loss, acc) = report.epochs.last().copied().unwrap_or((f64::NAN, f64::NAN));
            println!(
                "trained {} epochs (early stop: {}), final loss {loss:.4}, accuracy {acc:.3} -> {}",
                report.epochs.len(),
                report.stopped_early,
                output.display()
            );
        }
        Cmd::Score {
            model,
            kind,
            bins,
            start_s,
            input,
            output,
        } => {
            if let Some(v) = kind {
                cfg.encoder = v;
            }
            if let Some(v) = bins {
                cfg.mtf_bins = v;
            }
            let model = load_model(&model)?;
            let rec = load_recording(&input)?;
            let t0 = start_s.unwrap_or(0.0).ceil();
            if t0 < 0.0 {
                return Err(Error::invalid("start second must be non-negative"));
            }
            let len = rec.sampling_rate_hz.round() as usize;
            let first = t0 as usize * len;
            if first >= rec.samples.len() {
                return Err(Error::invalid("start second past the recording end"));
            }
            let stream = score_samples(
                &model,
                &rec.samples[first..],
                rec.sampling_rate_hz,
                cfg.encoder,
                cfg.mtf_bins,
                &rec.id,
                t0,
            )?;
            stream.save_csv(&output)?;
            println!("{} seconds scored -> {}", stream.values.len(), output.display());
        }
        Cmd::Forecast {
            z,
            y,
            preictal_min,
            input,
            output,
        } => {
            let fcfg = ForecastConfig::new(
                z.unwrap_or(cfg.z),
                y.unwrap_or(cfg.y),
                preictal_min.unwrap_or(cfg.preictal_minutes),
            )?;
            let stream = load_probability_stream(&input)?;
            let (_likelihood, _fp, alarms) = forecast_stream(&stream, &fcfg)?;
            save_alarms_csv(&alarms, stream.start_time_s, &output)?;
            println!("{} alarms -> {}", alarms.len(), output.display());
        }
        Cmd::Search {
            recording,
            split,
            streams,
            encoders,
            preictal,
            out,
        } => {
            if let Some(v) = &encoders {
                cfg.set("grid.encoders", v)?;
            }
            if let Some(v) = &preictal {
                cfg.set("grid.preictal_minutes", v)?;
            }
            let rec = load_recording(&recording)?;
            let split = SeizureSplit::load(&split, rec.seizure_count())?;
            let region = test_region(&rec, &split, cfg.postictal_buffer_min * 60.0)?;
            let onsets: Vec<f64> = split
                .test_indices
                .iter()
                .map(|&i| rec.seizure_onsets_s[i])
                .collect();
            let mut inputs = Vec::new();
            for &pre in &cfg.grid_preictal_minutes {
                let labeling =
                    label_intervals_with_buffer(&rec, pre, cfg.postictal_buffer_min * 60.0)?;
                for &enc in &cfg.grid_encoders {
                    let path = streams.join(format!("{}-{}.csv", enc.as_str(), pre));
                    inputs.push(GridInput {
                        encoder: enc,
                        preictal_minutes: pre,
                        stream: load_probability_stream(&path)?,
                        onsets_s: onsets.clone(),
                        labeling: labeling.clone(),
                        region,
                    });
                }
            }
            let result = grid_search(&inputs)?;
            save_report_csv(&result.points, &rec.id, &cfg.hash(), &out)?;
            let b = &result.best;
            println!(
                "{} grid points -> {}",
                result.points.len(),
                out.display()
            );
            println!(
                "best: {} preictal {} min, Z={:.2} Y={:.1}, SE={:.3} FPR/h={:.3}",
                b.encoder.as_str(),
                b.preictal_minutes,
                b.z,
                b.y,
                b.se,
                b.fpr_per_h
            );
        }
        Cmd::Report {
            z,
            y,
            preictal_min,
            input,
            output,
        } => {
            let fcfg = ForecastConfig::new(
                z.unwrap_or(cfg.z),
                y.unwrap_or(cfg.y),
                preictal_min.unwrap_or(cfg.preictal_minutes),
            )?;
            let stream = load_probability_stream(&input)?;
            let (likelihood, fp, alarms) = forecast_stream(&stream, &fcfg)?;
            write_traces(&stream, &likelihood, &fp, &alarms, &fcfg, &output)?;
            println!(
                "{} seconds of traces -> {}",
                stream.values.len(),
                output.display()
            );
        }
        Cmd::Synth { seed, out } => {
            if let Some(v) = seed {
                cfg.synth_seed = v;
            }
            let (rec, split) = ictus_core::synth::make_benchmark_suite(cfg.synth_seed)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let rec_path = out.join("recording.rec");
            let split_path = out.join("split.txt");
            rec.save(&rec_path, RecordingFormat::Bin)?;
            split.save(&split_path)?;
            println!(
                "{}: {} samples, {} seizures -> {} + {}",
                rec.id,
                rec.samples.len(),
                rec.seizure_count(),
                rec_path.display(),
                split_path.display()
            );
        }
        Cmd::Repro { seed, out } => {
            let mut cfg = repro_config(seed.unwrap_or(42));
            if let Some(p) = &cli.config {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                cfg.apply_kv(&text)?;
                if let Some(v) = seed {
                    cfg.synth_seed = v;
                }
            }
            let t0 = std::time::Instant::now();
            let (_rec, run) = run_repro(&cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            cfg.save(&out.join("config.txt"))?;
            for arm in &run.arms {
                let tag = format!("{}-{}", arm.encoder.as_str(), arm.preictal_minutes);
                arm.stream.save_csv(&out.join(format!("{tag}.csv")))?;
                save_model(&arm.model, &out.join(format!("{tag}.model")))?;
            }
            save_report_csv(
                &run.result.points,
                &run.recording_id,
                &run.config_hash,
                &out.join("report.csv"),
            )?;
            println!(
                "{}: {} grid points in {:.0} s (config {})",
                run.recording_id,
                run.result.points.len(),
                t0.elapsed().as_secs_f64(),
                run.config_hash
            );
            for p in best_per_encoder(&run.result) {
                println!(
                    "best {}: preictal {} min, Z={:.2} Y={:.1}, SE={:.3} FPR/h={:.3}",
                    p.encoder.as_str(),
                    p.preictal_minutes,
                    p.z,
                    p.y,
                    p.se,
                    p.fpr_per_h
                );
            }
            let b = &run.result.best;
            println!(
                "overall best: {} preictal {} min, Z={:.2} Y={:.1}, SE={:.3} FPR/h={:.3}",
                b.encoder.as_str(),
                b.preictal_minutes,
                b.z,
                b.y,
                b.se,
                b.fpr_per_h
            );
        }
    }
    Ok(())
}

/// Figure-style traces: per-second probability, smoothed likelihood,
/// firing power, and alarm markers, absolute-time aligned.
fn write_traces(
    stream: &ictus_core::classifier::ProbabilityStream,
    likelihood: &ictus_core::forecast::SecondSeries,
    fp: &ictus_core::forecast::SecondSeries,
    alarms: &[ictus_core::forecast::AlarmEvent],
    fcfg: &ForecastConfig,
    path: &Path,
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "# recording_id={}", stream.recording_id).unwrap();
    writeln!(out, "# Z={} Y={} preictal_min={}", fcfg.z, fcfg.y, fcfg.preictal_minutes).unwrap();
    writeln!(out, "time_s,p_preictal,likelihood,firing_power,alarm").unwrap();
    // Alarm times are stream-relative seconds.
    let alarm_at = |rel: f64| alarms.iter().any(|a| a.time_s == rel);
    for k in 0..stream.values.len() {
        let t = stream.start_time_s + (k + 1) as f64;
        let lk = k
            .checked_sub(likelihood.first_index)
            .and_then(|i| likelihood.values.get(i))
            .map_or(String::new(), |v| format!("{v}"));
        let fpv = k
            .checked_sub(fp.first_index)
            .and_then(|i| fp.values.get(i))
            .map_or(String::new(), |v| format!("{v}"));
        writeln!(
            out,
            "{t},{},{lk},{fpv},{}",
            stream.values[k],
            u8::from(alarm_at(t - stream.start_time_s))
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
