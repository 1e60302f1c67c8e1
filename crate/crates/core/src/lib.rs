//! Single-channel EEG seizure forecasting at desk scale.
//!
//! Pipeline: load or synthesize a recording, bandpass + notch filter it,
//! normalize, label the timeline into interictal/preictal regions, cut
//! one-second windows, encode each window as an image (recurrence plot,
//! Gramian angular field, or Markov transition field), classify with a
//! compact CNN, average the softmax outputs into a seizure likelihood, and
//! raise alarms through the two-threshold firing-power scheme. Evaluation
//! computes sensitivity and FPR/h and grid-searches the thresholds.

pub mod classifier;
pub mod config;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod pipeline;
pub mod preprocess;
pub mod recording;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
