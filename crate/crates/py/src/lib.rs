//! Python bindings for the core encoders, filters, and forecast math.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ictus_core::classifier::{ProbabilityStream, StreamSource};
use ictus_core::forecast::{forecast_stream, ForecastConfig, SecondSeries};
use ictus_core::{encoders, evaluation, preprocess};

fn err(e: ictus_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: encoders::EncodedMatrix) -> Vec<Vec<f64>> {
    m.values.chunks(m.size).map(<[f64]>::to_vec).collect()
}

/// Unthresholded recurrence plot |x_i - x_j| as a nested list.
#[pyfunction]
fn recurrence_plot(window: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    encoders::recurrence_plot(&window).map(rows).map_err(err)
}

/// Gramian angular summation field of a min-max rescaled window.
#[pyfunction]
fn gramian_angular_field(window: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    encoders::gramian_angular_summation(&window)
        .map(rows)
        .map_err(err)
}

/// Markov transition field with quantile bins.
#[pyfunction]
#[pyo3(signature = (window, n_bins = encoders::DEFAULT_MTF_BINS))]
fn markov_transition_field(window: Vec<f64>, n_bins: usize) -> PyResult<Vec<Vec<f64>>> {
    encoders::markov_transition_field(&window, n_bins)
        .map(rows)
        .map_err(err)
}

/// Encode and quantize one window; returns (size, grayscale bytes).
#[pyfunction]
#[pyo3(signature = (window, kind, n_bins = encoders::DEFAULT_MTF_BINS))]
fn encode_image(window: Vec<f64>, kind: &str, n_bins: usize) -> PyResult<(usize, Vec<u8>)> {
    let kind: encoders::EncoderKind = kind.parse().map_err(err)?;
    let img = encoders::encode_window(&window, kind, n_bins)
        .and_then(|m| encoders::quantize_to_image(&m))
        .map_err(err)?;
    Ok((img.size, img.pixels))
}

/// Butterworth bandpass (causal, direct form II transposed).
#[pyfunction]
fn bandpass_filter(
    samples: Vec<f64>,
    low_hz: f64,
    high_hz: f64,
    order: usize,
    fs_hz: f64,
) -> PyResult<Vec<f64>> {
    let cascade =
        preprocess::design_butterworth_bandpass(low_hz, high_hz, order, fs_hz).map_err(err)?;
    preprocess::apply_filter(&cascade, &samples).map_err(err)
}

/// Biquad notch at `center_hz`.
#[pyfunction]
fn notch_filter(
    samples: Vec<f64>,
    center_hz: f64,
    bandwidth_hz: f64,
    fs_hz: f64,
) -> PyResult<Vec<f64>> {
    let cascade = preprocess::design_notch(center_hz, bandwidth_hz, fs_hz).map_err(err)?;
    preprocess::apply_filter(&cascade, &samples).map_err(err)
}

/// Scale to a maximum absolute value of 1.
#[pyfunction]
fn normalize(samples: Vec<f64>) -> PyResult<Vec<f64>> {
    preprocess::normalize_max_abs(&samples).map_err(err)
}

fn stream_of(values: Vec<f64>) -> ProbabilityStream {
    ProbabilityStream {
        recording_id: "python".into(),
        start_time_s: 0.0,
        values,
        source: StreamSource::External,
    }
}

fn series_out(s: SecondSeries) -> (usize, Vec<f64>) {
    (s.first_index, s.values)
}

/// 60 s moving average of per-second probabilities; returns
/// (first defined stream index, values).
#[pyfunction]
#[pyo3(signature = (probabilities, window_s = 60))]
fn smooth_likelihood(probabilities: Vec<f64>, window_s: usize) -> PyResult<(usize, Vec<f64>)> {
    ictus_core::forecast::smooth_likelihood(&stream_of(probabilities), window_s)
        .map(series_out)
        .map_err(err)
}

/// Firing power of an already-binarized likelihood series.
#[pyfunction]
fn firing_power(
    binary: Vec<f64>,
    first_index: usize,
    preictal_minutes: u32,
) -> PyResult<(usize, Vec<f64>)> {
    let series = SecondSeries {
        first_index,
        values: binary,
    };
    ictus_core::forecast::firing_power(&series, preictal_minutes)
        .map(series_out)
        .map_err(err)
}

/// Full forecast chain over a probability stream; returns
/// [(alarm_time_s, firing_power)] with times relative to the stream start.
#[pyfunction]
fn forecast_alarms(
    probabilities: Vec<f64>,
    z: f64,
    y: f64,
    preictal_minutes: u32,
) -> PyResult<Vec<(f64, f64)>> {
    let cfg = ForecastConfig::new(z, y, preictal_minutes).map_err(err)?;
    let (_likelihood, _fp, alarms) = forecast_stream(&stream_of(probabilities), &cfg).map_err(err)?;
    Ok(alarms.into_iter().map(|a| (a.time_s, a.fp_value)).collect())
}

/// SE = TP / (TP + FN).
#[pyfunction]
fn sensitivity(tp: usize, fn_: usize) -> PyResult<f64> {
    let counts = evaluation::EvalCounts {
        tp,
        fn_,
        fp: 0,
        p: tp + fn_,
        interictal_hours: 0.0,
    };
    evaluation::sensitivity(&counts).map_err(err)
}

/// False alarms per interictal hour.
#[pyfunction]
fn fpr_per_hour(fp: usize, interictal_hours: f64) -> PyResult<f64> {
    let counts = evaluation::EvalCounts {
        tp: 0,
        fn_: 0,
        fp,
        p: 0,
        interictal_hours,
    };
    evaluation::fpr_per_hour(&counts).map_err(err)
}

/// The Z and Y threshold grids swept by the search.
#[pyfunction]
fn threshold_grids() -> (Vec<f64>, Vec<f64>) {
    (evaluation::z_grid(), evaluation::y_grid())
}

#[pymodule]
fn ictus(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(recurrence_plot, m)?)?;
    m.add_function(wrap_pyfunction!(gramian_angular_field, m)?)?;
    m.add_function(wrap_pyfunction!(markov_transition_field, m)?)?;
    m.add_function(wrap_pyfunction!(encode_image, m)?)?;
    m.add_function(wrap_pyfunction!(bandpass_filter, m)?)?;
    m.add_function(wrap_pyfunction!(notch_filter, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(firing_power, m)?)?;
    m.add_function(wrap_pyfunction!(forecast_alarms, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(fpr_per_hour, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_grids, m)?)?;
    Ok(())
}
