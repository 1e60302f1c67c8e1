//! Window-to-image encoders: Recurrence Plot, Gramian Angular Field
//! (summation), and Markov Transition Field, plus 8-bit quantization.
//!
//! Each encoder maps an N-sample window to an N x N real matrix; the
//! quantizer maps that to an N x N x 3 grayscale-replicated 8-bit image
//! using a fixed per-kind value range so pixel values are comparable
//! across windows.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    Rp,
    Gaf,
    Mtf,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [EncoderKind::Rp, EncoderKind::Gaf, EncoderKind::Mtf];

    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderKind::Rp => "rp",
            EncoderKind::Gaf => "gaf",
            EncoderKind::Mtf => "mtf",
        }
    }

    /// Fixed quantization range for this encoder's outputs.
    pub fn value_range(&self) -> (f64, f64) {
        match self {
            // Signals are normalized to [-1, 1], so pairwise distances cap at 2.
            EncoderKind::Rp => (0.0, 2.0),
            EncoderKind::Gaf => (-1.0, 1.0),
            EncoderKind::Mtf => (0.0, 1.0),
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rp" => Ok(EncoderKind::Rp),
            "gaf" => Ok(EncoderKind::Gaf),
            "mtf" => Ok(EncoderKind::Mtf),
            other => Err(Error::invalid(format!("unknown encoder kind {other:?}"))),
        }
    }
}

/// Square real-valued matrix produced by one encoder, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub kind: EncoderKind,
    pub size: usize,
    pub values: Vec<f64>,
}

impl EncodedMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }
}

/// Quantized grayscale-replicated image, `size x size x 3` interleaved u8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedImage {
    pub kind: EncoderKind,
    pub size: usize,
    pub pixels: Vec<u8>,
}

fn check_finite(window: &[f64]) -> Result<()> {
    if let Some(index) = window.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    if window.is_empty() {
        return Err(Error::invalid("empty window"));
    }
    Ok(())
}

/// Unthresholded recurrence plot: `R[i,j] = |x_i - x_j|`
/// (embedding dimension 1, time delay 1).
pub fn recurrence_plot(window: &[f64]) -> Result<EncodedMatrix> {
    check_finite(window)?;
    let n = window.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = (window[i] - window[j]).abs();
        }
    }
    Ok(EncodedMatrix {
        kind: EncoderKind::Rp,
        size: n,
        values,
    })
}

/// Binarized recurrence plot: 1 where the pairwise distance is at or below
/// the threshold, 0 elsewhere.
pub fn recurrence_plot_thresholded(window: &[f64], threshold: f64) -> Result<EncodedMatrix> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid("threshold must be non-negative"));
    }
    let mut m = recurrence_plot(window)?;
    for v in &mut m.values {
        *v = if *v <= threshold { 1.0 } else { 0.0 };
    }
    Ok(m)
}

/// Gramian angular summation field.
///
/// The window is min-max rescaled to [-1, 1]; with `phi_i = arccos(x_i)`,
/// `G[i,j] = cos(phi_i + phi_j)`, computed through the algebraic identity
/// `x_i x_j - sqrt(1 - x_i^2) sqrt(1 - x_j^2)`. A constant window rescales
/// to all zeros, giving G = -1 everywhere.
pub fn gramian_angular_summation(window: &[f64]) -> Result<EncodedMatrix> {
    check_finite(window)?;
    let n = window.len();
    let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rescaled: Vec<f64> = if max > min {
        window
            .iter()
            .map(|x| (2.0 * (x - min) / (max - min) - 1.0).clamp(-1.0, 1.0))
            .collect()
    } else {
        vec![0.0; n]
    };
    let sins: Vec<f64> = rescaled.iter().map(|x| (1.0 - x * x).max(0.0).sqrt()).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = rescaled[i] * rescaled[j] - sins[i] * sins[j];
        }
    }
    Ok(EncodedMatrix {
        kind: EncoderKind::Gaf,
        size: n,
        values,
    })
}

pub const DEFAULT_MTF_BINS: usize = 8;

/// Quantile bin edges at k/n_bins, linear interpolation, duplicates merged.
fn quantile_edges(window: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = window.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut edges = Vec::with_capacity(n_bins - 1);
    for k in 1..n_bins {
        let pos = (n - 1) as f64 * k as f64 / n_bins as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let e = if lo + 1 < n {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        };
        edges.push(e);
    }
    edges.dedup();
    edges
}

/// Bin index: number of edges strictly below `x`.
fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e < x)
}

/// Markov transition field.
///
/// Values are assigned to quantile bins, consecutive-pair transition counts
/// are row-normalized into W (zero rows stay zero), and
/// `M[i,j] = W[bin(x_i), bin(x_j)]`.
pub fn markov_transition_field(window: &[f64], n_bins: usize) -> Result<EncodedMatrix> {
    check_finite(window)?;
    if n_bins < 2 {
        return Err(Error::invalid("need at least 2 quantile bins"));
    }
    let n = window.len();
    let edges = quantile_edges(window, n_bins);
    let b = edges.len() + 1; // effective bin count after duplicate merging
    let bins: Vec<usize> = window.iter().map(|&x| bin_of(&edges, x)).collect();

    let mut w = vec![0.0f64; b * b];
    for pair in bins.windows(2) {
        w[pair[0] * b + pair[1]] += 1.0;
    }
    for row in 0..b {
        let sum: f64 = w[row * b..(row + 1) * b].iter().sum();
        if sum > 0.0 {
            for v in &mut w[row * b..(row + 1) * b] {
                *v /= sum;
            }
        }
    }

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = w[bins[i] * b + bins[j]];
        }
    }
    Ok(EncodedMatrix {
        kind: EncoderKind::Mtf,
        size: n,
        values,
    })
}

/// Encode one window with the given encoder.
pub fn encode_window(window: &[f64], kind: EncoderKind, mtf_bins: usize) -> Result<EncodedMatrix> {
    match kind {
        EncoderKind::Rp => recurrence_plot(window),
        EncoderKind::Gaf => gramian_angular_summation(window),
        EncoderKind::Mtf => markov_transition_field(window, mtf_bins),
    }
}

/// Linear map from the encoder's fixed value range to {0..255}, round half
/// up, grayscale replicated to three channels.
pub fn quantize_to_image(m: &EncodedMatrix) -> Result<EncodedImage> {
    let (lo, hi) = m.kind.value_range();
    let span = hi - lo;
    let mut pixels = Vec::with_capacity(m.values.len() * 3);
    for &v in &m.values {
        if v < lo - 1e-9 || v > hi + 1e-9 {
            return Err(Error::invalid(format!(
                "encoder value {v} outside declared range [{lo}, {hi}]"
            )));
        }
        let p = ((v.clamp(lo, hi) - lo) / span * 255.0 + 0.5).floor() as u8;
        pixels.extend_from_slice(&[p, p, p]);
    }
    Ok(EncodedImage {
        kind: m.kind,
        size: m.size,
        pixels,
    })
}

/// Encode and quantize a batch of windows; order-preserving regardless of
/// parallelism, per-window errors reported with the window index.
pub fn encode_batch(
    windows: &[Vec<f64>],
    kind: EncoderKind,
    mtf_bins: usize,
) -> Result<Vec<EncodedImage>> {
    windows
        .par_iter()
        .enumerate()
        .map(|(index, w)| {
            encode_window(w, kind, mtf_bins)
                .and_then(|m| quantize_to_image(&m))
                .map_err(|e| Error::Window {
                    index,
                    detail: e.to_string(),
                })
        })
        .collect()
}

const IMGSET_MAGIC: &[u8; 4] = b"IIMG";
const IMGSET_VERSION: u8 = 1;

/// A homogeneous set of quantized images on disk: 16-byte header
/// (magic, version, kind, dims, count), config-hash block, raw pixel data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub kind: EncoderKind,
    pub size: usize,
    pub config_hash: String,
    pub images: Vec<EncodedImage>,
}

impl ImageSet {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let kind_byte = match self.kind {
            EncoderKind::Rp => 0u8,
            EncoderKind::Gaf => 1,
            EncoderKind::Mtf => 2,
        };
        let res: std::io::Result<()> = (|| {
            w.write_all(IMGSET_MAGIC)?;
            w.write_all(&[IMGSET_VERSION, kind_byte])?;
            w.write_all(&(self.size as u16).to_le_bytes())?;
            w.write_all(&(self.size as u16).to_le_bytes())?;
            w.write_all(&[3u8, 0u8])?;
            w.write_all(&(self.images.len() as u32).to_le_bytes())?;
            w.write_all(&(self.config_hash.len() as u32).to_le_bytes())?;
            w.write_all(self.config_hash.as_bytes())?;
            for img in &self.images {
                w.write_all(&img.pixels)?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<ImageSet> {
        use std::io::Read;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = std::io::BufReader::new(file);
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
        if &header[0..4] != IMGSET_MAGIC || header[4] != IMGSET_VERSION {
            return Err(Error::format("image set", path, "bad magic or version"));
        }
        let kind = match header[5] {
            0 => EncoderKind::Rp,
            1 => EncoderKind::Gaf,
            2 => EncoderKind::Mtf,
            other => {
                return Err(Error::format(
                    "image set",
                    path,
                    format!("bad kind byte {other}"),
                ))
            }
        };
        let h = u16::from_le_bytes([header[6], header[7]]) as usize;
        let w_ = u16::from_le_bytes([header[8], header[9]]) as usize;
        if h != w_ || header[10] != 3 {
            return Err(Error::format("image set", path, "non-square or non-3-channel"));
        }
        let count = u32::from_le_bytes([header[12], header[13], header[14], header[15]]) as usize;
        let mut lenb = [0u8; 4];
        r.read_exact(&mut lenb).map_err(|e| Error::io(path, e))?;
        let mut hash = vec![0u8; u32::from_le_bytes(lenb) as usize];
        r.read_exact(&mut hash).map_err(|e| Error::io(path, e))?;
        let config_hash =
            String::from_utf8(hash).map_err(|_| Error::format("image set", path, "bad utf-8"))?;
        let mut images = Vec::with_capacity(count);
        for _ in 0..count {
            let mut pixels = vec![0u8; h * h * 3];
            r.read_exact(&mut pixels).map_err(|e| Error::io(path, e))?;
            images.push(EncodedImage {
                kind,
                size: h,
                pixels,
            });
        }
        Ok(ImageSet {
            kind,
            size: h,
            config_hash,
            images,
        })
    }
}

/// Binary portable pixmap (P6) export for human inspection.
pub fn write_ppm(img: &EncodedImage, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        write!(w, "P6\n{} {}\n255\n", img.size, img.size)?;
        w.write_all(&img.pixels)?;
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}
