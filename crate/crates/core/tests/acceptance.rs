//! Release gate: one test per acceptance criterion, each printing a single
//! pass/fail line (visible with `cargo test --test acceptance -- --nocapture`).

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ictus_core::classifier::{
    build_model, gradient_check, train, ProbabilityStream, StreamSource, TrainConfig,
};
use ictus_core::encoders::{
    encode_batch, gramian_angular_summation, markov_transition_field, recurrence_plot,
    EncoderKind,
};
use ictus_core::evaluation::{
    grid_search, save_report_csv, sensitivity, y_grid, z_grid, EvalCounts, GridInput,
    ScoredRegion,
};
use ictus_core::forecast::{
    firing_power, raise_alarms, smooth_likelihood, ForecastConfig, SecondSeries,
};
use ictus_core::pipeline::{best_per_encoder, repro_config, run_repro};
use ictus_core::preprocess::{apply_filter, design_butterworth_bandpass, design_notch};
use ictus_core::segmentation::{label_intervals_with_buffer, WindowLabel};

fn criterion(n: usize, name: &str, body: impl FnOnce() + UnwindSafe) {
    match catch_unwind(body) {
        Ok(()) => println!("criterion {n} ({name}): pass"),
        Err(cause) => {
            println!("criterion {n} ({name}): fail");
            resume_unwind(cause);
        }
    }
}

// Matches the normalized-sample contract (max abs 1) the encoders assume.
fn random_window(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

#[test]
fn criterion_1_encoder_oracles() {
    criterion(1, "encoder oracle equivalence", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1001);
        for _ in 0..100 {
            let w = random_window(&mut rng, 256);
            let n = w.len();

            // RP oracle: direct double loop.
            let rp = recurrence_plot(&w).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((rp.get(i, j) - (w[i] - w[j]).abs()).abs() < 1e-10);
                }
            }

            // GAF oracle: trigonometric form cos(phi_i + phi_j) with
            // phi = arccos of the rescaled value.
            let gaf = gramian_angular_summation(&w).unwrap();
            let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let phi: Vec<f64> = w
                .iter()
                .map(|x| (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0).acos())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (gaf.get(i, j) - (phi[i] + phi[j]).cos()).abs() < 1e-10,
                        "GAF dual forms disagree at ({i},{j})"
                    );
                }
            }

            // MTF oracle: quantile bins and row-normalized transition counts,
            // rebuilt from scratch.
            let bins = 8;
            let mtf = markov_transition_field(&w, bins).unwrap();
            let mut sorted = w.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut edges: Vec<f64> = (1..bins)
                .map(|k| {
                    let pos = (n - 1) as f64 * k as f64 / bins as f64;
                    let lo = pos.floor() as usize;
                    let frac = pos - lo as f64;
                    sorted[lo] * (1.0 - frac) + sorted[(lo + 1).min(n - 1)] * frac
                })
                .collect();
            edges.dedup();
            let b = edges.len() + 1;
            let assign: Vec<usize> = w
                .iter()
                .map(|&x| edges.iter().filter(|&&e| e < x).count())
                .collect();
            let mut counts = vec![vec![0.0f64; b]; b];
            for k in 0..n - 1 {
                counts[assign[k]][assign[k + 1]] += 1.0;
            }
            for row in &mut counts {
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    for v in row.iter_mut() {
                        *v /= s;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    assert!((mtf.get(i, j) - counts[assign[i]][assign[j]]).abs() < 1e-10);
                }
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        assert!(elapsed < 10.0, "oracle check took {elapsed:.1} s");
    });
}

#[test]
fn criterion_2_encoder_hand_cases() {
    criterion(2, "encoder hand cases", || {
        let rp = recurrence_plot(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(rp.values, vec![0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0]);

        let gaf = gramian_angular_summation(&[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(gaf.values, vec![1.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0]);

        let mtf = markov_transition_field(&[0.0, 1.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(
            mtf.values,
            vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]
        );
    });
}

#[test]
fn criterion_3_filter_specs() {
    criterion(3, "filter specifications", || {
        let fs = 256.0;
        let cascade = design_butterworth_bandpass(0.5, 100.0, 4, fs)
            .unwrap()
            .then(&design_notch(50.0, 2.0, fs).unwrap());
        let n = (fs as usize) * 20;
        let tail = |y: &[f64]| {
            let t = &y[y.len() - fs as usize..];
            (t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64).sqrt()
        };
        let tone = |f: f64| -> Vec<f64> {
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
                .collect()
        };
        let input_rms = 1.0 / 2.0f64.sqrt();

        // 50 Hz steady state down at least 40 dB.
        let notched = apply_filter(&cascade, &tone(50.0)).unwrap();
        let atten_db = 20.0 * (tail(&notched) / input_rms).log10();
        assert!(atten_db <= -40.0, "50 Hz attenuation only {atten_db:.1} dB");

        // 10 Hz passband within 1 dB.
        let passed = apply_filter(&cascade, &tone(10.0)).unwrap();
        let gain_db = 20.0 * (tail(&passed) / input_rms).log10();
        assert!(gain_db.abs() <= 1.0, "10 Hz gain {gain_db:.2} dB");

        // DC blocked.
        let dc = apply_filter(&cascade, &vec![1.0; n]).unwrap();
        assert!(tail(&dc) < 1e-3, "DC leaks through: {}", tail(&dc));

        // Linearity: filter(a*x + b*y) = a*filter(x) + b*filter(y).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_window(&mut rng, 2048);
        let y = random_window(&mut rng, 2048);
        let (a, b) = (1.7, -0.4);
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let fx = apply_filter(&cascade, &x).unwrap();
        let fy = apply_filter(&cascade, &y).unwrap();
        let fm = apply_filter(&cascade, &mixed).unwrap();
        let scale = fm.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for k in 0..fm.len() {
            assert!(((a * fx[k] + b * fy[k] - fm[k]) / scale).abs() < 1e-10);
        }
    });
}

#[test]
fn criterion_4_gradient_check() {
    criterion(4, "gradient check", || {
        let model = build_model(32, 3, 2, 404).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let pixels: Vec<u8> = (0..32 * 32 * 3).map(|_| rng.random::<u8>()).collect();
        let img = ictus_core::encoders::EncodedImage {
            kind: EncoderKind::Mtf,
            size: 32,
            pixels,
        };
        let err = gradient_check(&model, &img, WindowLabel::Preictal, 1e-4, 250, 404).unwrap();
        assert!(err < 1e-4, "max relative gradient error {err}");
    });
}

#[test]
fn criterion_5_stream_math_oracles() {
    criterion(5, "stream-math oracles", || {
        let mut rng = ChaCha8Rng::seed_from_u64(505);

        // Smoothing and firing power vs naive re-summation on 10^4 samples.
        let values: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let stream = ProbabilityStream {
            recording_id: "oracle".into(),
            start_time_s: 0.0,
            values: values.clone(),
            source: StreamSource::External,
        };
        let lk = smooth_likelihood(&stream, 60).unwrap();
        for (i, &v) in lk.values.iter().enumerate() {
            let k = lk.first_index + i;
            let naive: f64 = values[k + 1 - 60..=k].iter().sum::<f64>() / 60.0;
            assert!((v - naive).abs() < 1e-12, "likelihood drift at {k}");
        }
        let binary = SecondSeries {
            first_index: lk.first_index,
            values: lk.values.iter().map(|&v| f64::from(v > 0.5)).collect(),
        };
        let fp = firing_power(&binary, 10).unwrap();
        for (i, &v) in fp.values.iter().enumerate() {
            let naive: f64 = binary.values[i..i + 600].iter().sum::<f64>() / 600.0;
            assert!((v - naive).abs() < 1e-12, "firing power drift at {i}");
        }

        // Alarm generator vs a brute-force event simulator on 1000 series.
        for case in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + case);
            let len = rng.random_range(50..400);
            let first_index = rng.random_range(0..100);
            let series = SecondSeries {
                first_index,
                values: (0..len).map(|_| rng.random::<f64>()).collect(),
            };
            let preictal = [10u32, 20, 30, 40][rng.random_range(0..4)];
            let y = y_grid()[rng.random_range(0..8)];
            let cfg = ForecastConfig::new(0.5, y, preictal).unwrap();

            let got = raise_alarms(&series, &cfg).unwrap();
            // Simulator: scan seconds in order, fire on threshold crossing,
            // then hold off for the refractory period.
            let mut expected = Vec::new();
            let mut last = f64::NEG_INFINITY;
            for (k, &v) in series.values.iter().enumerate() {
                let t = (first_index + k + 1) as f64;
                if v > cfg.y && t - last >= cfg.refractory_s() {
                    expected.push(t);
                    last = t;
                }
            }
            let got_times: Vec<f64> = got.iter().map(|a| a.time_s).collect();
            assert_eq!(got_times, expected, "case {case}");
        }
    });
}

#[test]
fn criterion_6_metric_fixtures() {
    criterion(6, "metric fixtures", || {
        let counts = EvalCounts {
            tp: 2,
            fn_: 1,
            fp: 0,
            p: 3,
            interictal_hours: 1.0,
        };
        let se = sensitivity(&counts).unwrap();
        assert!((se - 0.667).abs() < 5e-4, "SE {se}");

        let zs = z_grid();
        let ys = y_grid();
        assert_eq!(zs.len(), 18);
        assert_eq!(ys.len(), 8);
        assert!((zs[0] - 0.05).abs() < 1e-12 && (zs[17] - 0.90).abs() < 1e-12);
        assert!((ys[0] - 0.2).abs() < 1e-12 && (ys[7] - 0.9).abs() < 1e-12);
    });
}

#[test]
fn criterion_7_end_to_end_synthetic_benchmark() {
    criterion(7, "end-to-end synthetic benchmark", || {
        let start = Instant::now();
        let cfg = repro_config(42);
        let dir = tempfile::tempdir().unwrap();

        let mut reports = Vec::new();
        for pass in 0..2 {
            let (_rec, run) = run_repro(&cfg).unwrap();
            let path = dir.path().join(format!("report-{pass}.csv"));
            save_report_csv(&run.result.points, &run.recording_id, &run.config_hash, &path)
                .unwrap();
            reports.push(std::fs::read(&path).unwrap());

            let bests = best_per_encoder(&run.result);
            assert_eq!(bests.len(), 3);
            for p in &bests {
                assert_eq!(p.se, 1.0, "{} best SE {}", p.encoder.as_str(), p.se);
                assert!(
                    p.fpr_per_h <= 0.30,
                    "{} best FPR/h {}",
                    p.encoder.as_str(),
                    p.fpr_per_h
                );
                if p.encoder == EncoderKind::Rp {
                    assert!(p.fpr_per_h <= 0.15, "RP best FPR/h {}", p.fpr_per_h);
                }
            }
        }
        assert_eq!(reports[0], reports[1], "reports differ between runs");
        let elapsed = start.elapsed().as_secs_f64();
        assert!(elapsed < 900.0, "benchmark took {elapsed:.0} s");
    });
}

#[test]
fn criterion_8_determinism() {
    criterion(8, "determinism", || {
        // Encoding determinism.
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let windows: Vec<Vec<f64>> = (0..64).map(|_| random_window(&mut rng, 128)).collect();
        for kind in EncoderKind::ALL {
            let a = encode_batch(&windows, kind, 8).unwrap();
            let b = encode_batch(&windows, kind, 8).unwrap();
            assert_eq!(a, b);
        }

        // Training determinism for a fixed (seed, config, dataset).
        let images = encode_batch(&windows[..32].to_vec(), EncoderKind::Gaf, 8).unwrap();
        let labels: Vec<WindowLabel> = (0..32)
            .map(|i| {
                if i % 2 == 0 {
                    WindowLabel::Preictal
                } else {
                    WindowLabel::Interictal
                }
            })
            .collect();
        let tc = TrainConfig {
            max_epochs: 3,
            seed: 808,
            ..TrainConfig::default()
        };
        let mut m1 = build_model(128, 3, 4, 808).unwrap();
        let r1 = train(&mut m1, &images, &labels, &tc).unwrap();
        let mut m2 = build_model(128, 3, 4, 808).unwrap();
        let r2 = train(&mut m2, &images, &labels, &tc).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(r1.epochs, r2.epochs);

        // Parallel grid search ranks identically to a single-threaded run.
        let rec = ictus_core::synth::generate_recording(&ictus_core::synth::SynthConfig {
            id: "det".into(),
            duration_s: 1500.0,
            fs_hz: 64.0,
            seizure_times_s: vec![300.0, 1200.0],
            seizure_duration_s: 20.0,
            signature: ictus_core::synth::PreictalSignature {
                ramp_duration_s: 120.0,
                ..Default::default()
            },
            ..Default::default()
        })
        .unwrap();
        let labeling = label_intervals_with_buffer(&rec, 2, 90.0).unwrap();
        let region = ScoredRegion {
            start_s: 410.0,
            end_s: 1500.0,
        };
        let stream = ProbabilityStream {
            recording_id: "det".into(),
            start_time_s: 410.0,
            values: (0..1090).map(|_| rng.random::<f64>()).collect(),
            source: StreamSource::External,
        };
        let inputs = vec![GridInput {
            encoder: EncoderKind::Rp,
            preictal_minutes: 2,
            stream,
            onsets_s: vec![1200.0],
            labeling,
            region,
        }];
        let parallel = grid_search(&inputs).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| grid_search(&inputs))
            .unwrap();
        assert_eq!(parallel.points, single.points);
        assert_eq!(parallel.best, single.best);
    });
}
