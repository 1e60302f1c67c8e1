//! Alarm scoring (TP/FP against seizure onsets under SPH/SOP semantics),
//! sensitivity and FPR/h, and the exhaustive (Z, Y) threshold grid search.

use rayon::prelude::*;

use crate::classifier::ProbabilityStream;
use crate::encoders::EncoderKind;
use crate::error::{Error, Result};
use crate::forecast::{forecast_stream, AlarmClass, AlarmEvent, ForecastConfig};
use crate::segmentation::IntervalLabeling;

/// The stretch of recording time covered by a scored probability stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredRegion {
    pub start_s: f64,
    pub end_s: f64,
}

/// Alarm/seizure tallies for one evaluated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalCounts {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    /// Labeled positives: the test seizures.
    pub p: usize,
    pub interictal_hours: f64,
}

/// Classify alarms (given in absolute recording seconds) against onsets.
///
/// An alarm at `t` is a true positive iff some onset lies in
/// `(t + SPH, t + SPH + SOP]`; each onset is credited to at most one alarm,
/// earliest claiming alarm wins. Alarms in ictal/postictal exclusion zones
/// that claim nothing are marked unresolved and excluded from FP counting.
pub fn classify_alarms(
    alarms: &mut [AlarmEvent],
    onsets_s: &[f64],
    cfg: &ForecastConfig,
    labeling: &IntervalLabeling,
    region: ScoredRegion,
) -> Result<EvalCounts> {
    if alarms.windows(2).any(|w| w[0].time_s > w[1].time_s) {
        return Err(Error::invalid("alarms must be sorted by time"));
    }
    let sph_s = cfg.sph_minutes * 60.0;
    let sop_s = cfg.sop_minutes * 60.0;

    let mut claimed = vec![false; onsets_s.len()];
    let mut tp = 0usize;
    let mut fp = 0usize;
    for alarm in alarms.iter_mut() {
        let lo = alarm.time_s + sph_s;
        let hi = lo + sop_s;
        let hit = onsets_s
            .iter()
            .enumerate()
            .find(|&(i, &on)| !claimed[i] && on > lo && on <= hi);
        match hit {
            Some((i, _)) => {
                claimed[i] = true;
                tp += 1;
                alarm.classification = AlarmClass::TruePositive;
            }
            None if labeling.is_excluded_time(alarm.time_s) => {
                alarm.classification = AlarmClass::Unresolved;
            }
            None => {
                fp += 1;
                alarm.classification = AlarmClass::FalsePositive;
            }
        }
    }

    let interictal_s: f64 = labeling
        .interictal
        .iter()
        .map(|iv| (iv.end_s.min(region.end_s) - iv.start_s.max(region.start_s)).max(0.0))
        .sum();

    Ok(EvalCounts {
        tp,
        fn_: onsets_s.len() - tp,
        fp,
        p: onsets_s.len(),
        interictal_hours: interictal_s / 3600.0,
    })
}

/// SE = TP / (TP + FN) = TP / P.
pub fn sensitivity(counts: &EvalCounts) -> Result<f64> {
    if counts.p == 0 {
        return Err(Error::invalid("no labeled positives"));
    }
    Ok(counts.tp as f64 / counts.p as f64)
}

/// False alarms per interictal hour.
pub fn fpr_per_hour(counts: &EvalCounts) -> Result<f64> {
    if counts.interictal_hours <= 0.0 {
        return Err(Error::invalid("no interictal time scored"));
    }
    Ok(counts.fp as f64 / counts.interictal_hours)
}

/// Z axis: 0.05 to 0.90, step 0.05 (18 values).
pub fn z_grid() -> Vec<f64> {
    (1..=18).map(|k| k as f64 * 0.05).collect()
}

/// Y axis: 0.2 to 0.9, step 0.1 (8 values).
pub fn y_grid() -> Vec<f64> {
    (2..=9).map(|k| k as f64 / 10.0).collect()
}

/// One scored stream to sweep thresholds over.
#[derive(Debug, Clone)]
pub struct GridInput {
    pub encoder: EncoderKind,
    pub preictal_minutes: u32,
    pub stream: ProbabilityStream,
    /// Test seizure onsets, absolute recording seconds.
    pub onsets_s: Vec<f64>,
    pub labeling: IntervalLabeling,
    pub region: ScoredRegion,
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub encoder: EncoderKind,
    pub preictal_minutes: u32,
    pub z: f64,
    pub y: f64,
    pub se: f64,
    pub fpr_per_h: f64,
    pub counts: EvalCounts,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    /// All evaluated points, ranked best-first.
    pub points: Vec<GridPoint>,
    pub best: GridPoint,
}

fn rank_key(p: &GridPoint) -> (i64, i64, i64, i64, u8, u32) {
    // Max SE, then min FPR/h, then min Z (determinism); remaining axes break
    // any residual ties so the ranking is a total order.
    let enc = match p.encoder {
        EncoderKind::Rp => 0u8,
        EncoderKind::Gaf => 1,
        EncoderKind::Mtf => 2,
    };
    (
        -(p.se * 1e9).round() as i64,
        (p.fpr_per_h * 1e9).round() as i64,
        (p.z * 1000.0).round() as i64,
        (p.y * 1000.0).round() as i64,
        enc,
        p.preictal_minutes,
    )
}

/// Evaluate one (Z, Y) pair on one input.
pub fn evaluate_point(input: &GridInput, z: f64, y: f64) -> Result<GridPoint> {
    let cfg = ForecastConfig::new(z, y, input.preictal_minutes)?;
    let (_likelihood, _fp, mut alarms) = forecast_stream(&input.stream, &cfg)?;
    for a in &mut alarms {
        a.time_s += input.stream.start_time_s;
    }
    let counts = classify_alarms(&mut alarms, &input.onsets_s, &cfg, &input.labeling, input.region)?;
    Ok(GridPoint {
        encoder: input.encoder,
        preictal_minutes: input.preictal_minutes,
        z,
        y,
        se: sensitivity(&counts)?,
        fpr_per_h: fpr_per_hour(&counts)?,
        counts,
    })
}

/// Sweep the full Z x Y grid over every input; deterministic ranking
/// regardless of evaluation order or parallelism.
pub fn grid_search(inputs: &[GridInput]) -> Result<GridSearchResult> {
    if inputs.is_empty() {
        return Err(Error::invalid("no streams to search over"));
    }
    let mut jobs = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        if input.stream.values.is_empty() {
            return Err(Error::invalid(format!(
                "missing stream for {} preictal {} min",
                input.encoder.as_str(),
                input.preictal_minutes
            )));
        }
        for &z in &z_grid() {
            for &y in &y_grid() {
                jobs.push((i, z, y));
            }
        }
    }
    let mut points: Vec<GridPoint> = jobs
        .par_iter()
        .map(|&(i, z, y)| evaluate_point(&inputs[i], z, y))
        .collect::<Result<_>>()?;
    points.sort_by_key(rank_key);
    let best = points[0].clone();
    Ok(GridSearchResult { points, best })
}

/// Ranked per-patient results table as CSV.
pub fn save_report_csv(
    points: &[GridPoint],
    patient: &str,
    config_hash: &str,
    path: &std::path::Path,
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "# config={config_hash}").unwrap();
    writeln!(out, "patient,encoder,preictal_min,Z,Y,SE,FPR_h").unwrap();
    for p in points {
        writeln!(
            out,
            "{patient},{},{},{:.2},{:.1},{:.4},{:.4}",
            p.encoder.as_str(),
            p.preictal_minutes,
            p.z,
            p.y,
            p.se,
            p.fpr_per_h
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
