//! Single-channel EEG recordings with seizure annotations.
//!
//! Two on-disk formats: a self-describing CSV (`# key=value` header lines,
//! one sample per line) and a compact binary format (magic bytes,
//! little-endian 64-bit floats). Binary round-trips are bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const BIN_MAGIC: &[u8; 8] = b"ICTUSREC";
const BIN_VERSION: u8 = 1;

/// On-disk representation of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingFormat {
    Csv,
    Bin,
}

impl RecordingFormat {
    /// Infer a format from a path extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("rec") => RecordingFormat::Bin,
            _ => RecordingFormat::Csv,
        }
    }
}

impl std::str::FromStr for RecordingFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordingFormat::Csv),
            "bin" => Ok(RecordingFormat::Bin),
            other => Err(Error::invalid(format!("unknown recording format {other:?}"))),
        }
    }
}

/// A single-channel sampled signal with seizure onset/offset annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub channel_label: String,
    pub sampling_rate_hz: f64,
    pub samples: Vec<f64>,
    /// Seconds from recording start, strictly increasing.
    pub seizure_onsets_s: Vec<f64>,
    /// Same length as onsets; `offsets[i] > onsets[i]` and `onsets[i+1] > offsets[i]`.
    pub seizure_offsets_s: Vec<f64>,
}

impl Recording {
    pub fn new(
        id: impl Into<String>,
        channel_label: impl Into<String>,
        sampling_rate_hz: f64,
        samples: Vec<f64>,
        seizure_onsets_s: Vec<f64>,
        seizure_offsets_s: Vec<f64>,
    ) -> Result<Self> {
        let rec = Recording {
            id: id.into(),
            channel_label: channel_label.into(),
            sampling_rate_hz,
            samples,
            seizure_onsets_s,
            seizure_offsets_s,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }

    pub fn seizure_count(&self) -> usize {
        self.seizure_onsets_s.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz > 0.0) {
            return Err(Error::invalid("sampling rate must be positive"));
        }
        if self.samples.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        if let Some(index) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        if self.seizure_onsets_s.len() != self.seizure_offsets_s.len() {
            return Err(Error::invalid("onset/offset count mismatch"));
        }
        let dur = self.duration_s();
        let mut prev_offset = f64::NEG_INFINITY;
        for (i, (&on, &off)) in self
            .seizure_onsets_s
            .iter()
            .zip(&self.seizure_offsets_s)
            .enumerate()
        {
            if off <= on {
                return Err(Error::invalid(format!(
                    "annotation order: seizure {i} offset {off} <= onset {on}"
                )));
            }
            if on <= prev_offset {
                return Err(Error::invalid(format!(
                    "annotation order: seizure {i} onset {on} overlaps previous offset {prev_offset}"
                )));
            }
            if on < 0.0 || off > dur {
                return Err(Error::invalid(format!(
                    "seizure {i} [{on}, {off}] outside recording [0, {dur}]"
                )));
            }
            prev_offset = off;
        }
        Ok(())
    }

    pub fn load(path: &Path, format: RecordingFormat) -> Result<Self> {
        match format {
            RecordingFormat::Csv => load_csv(path),
            RecordingFormat::Bin => load_bin(path),
        }
    }

    pub fn save(&self, path: &Path, format: RecordingFormat) -> Result<()> {
        match format {
            RecordingFormat::Csv => save_csv(self, path),
            RecordingFormat::Bin => save_bin(self, path),
        }
    }
}

fn load_csv(path: &Path) -> Result<Recording> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut id = None;
    let mut channel = None;
    let mut rate = None;
    let mut onsets = Vec::new();
    let mut offsets = Vec::new();
    let mut samples = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "id" => id = Some(value.to_string()),
                    "channel" => channel = Some(value.to_string()),
                    "rate" => {
                        rate = Some(value.parse::<f64>().map_err(|_| {
                            Error::format("recording csv", path, format!("bad rate {value:?}"))
                        })?)
                    }
                    "seizure" => {
                        let (a, b) = value.split_once(',').ok_or_else(|| {
                            Error::format("recording csv", path, format!("bad seizure {value:?}"))
                        })?;
                        let on = a.trim().parse::<f64>();
                        let off = b.trim().parse::<f64>();
                        match (on, off) {
                            (Ok(on), Ok(off)) => {
                                onsets.push(on);
                                offsets.push(off);
                            }
                            _ => {
                                return Err(Error::format(
                                    "recording csv",
                                    path,
                                    format!("bad seizure {value:?}"),
                                ))
                            }
                        }
                    }
                    // Hash stamps and other provenance comments are ignored on load.
                    _ => {}
                }
            }
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| {
            Error::format(
                "recording csv",
                path,
                format!("line {}: bad sample {line:?}", lineno + 1),
            )
        })?;
        if !v.is_finite() {
            return Err(Error::format(
                "recording csv",
                path,
                format!("NaN/Inf sample at index {}", samples.len()),
            ));
        }
        samples.push(v);
    }

    let rate = rate.ok_or_else(|| Error::format("recording csv", path, "missing # rate="))?;
    let channel =
        channel.ok_or_else(|| Error::format("recording csv", path, "missing # channel="))?;
    if samples.is_empty() {
        return Err(Error::format("recording csv", path, "no samples"));
    }
    let id = id.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "recording".to_string())
    });
    Recording::new(id, channel, rate, samples, onsets, offsets)
}

fn save_csv(rec: &Recording, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# id={}", rec.id).unwrap();
    writeln!(out, "# channel={}", rec.channel_label).unwrap();
    writeln!(out, "# rate={}", rec.sampling_rate_hz).unwrap();
    for (on, off) in rec.seizure_onsets_s.iter().zip(&rec.seizure_offsets_s) {
        writeln!(out, "# seizure={on},{off}").unwrap();
    }
    for s in &rec.samples {
        // Shortest representation that round-trips the exact f64 value.
        writeln!(out, "{s}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn save_bin(rec: &Recording, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        w.write_all(BIN_MAGIC)?;
        w.write_all(&[BIN_VERSION])?;
        write_str(&mut w, &rec.id)?;
        write_str(&mut w, &rec.channel_label)?;
        w.write_all(&rec.sampling_rate_hz.to_le_bytes())?;
        w.write_all(&(rec.samples.len() as u64).to_le_bytes())?;
        for s in &rec.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        w.write_all(&(rec.seizure_onsets_s.len() as u64).to_le_bytes())?;
        for (on, off) in rec.seizure_onsets_s.iter().zip(&rec.seizure_offsets_s) {
            w.write_all(&on.to_le_bytes())?;
            w.write_all(&off.to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

fn load_bin(path: &Path) -> Result<Recording> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != BIN_MAGIC {
        return Err(Error::format("recording bin", path, "bad magic"));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version).map_err(|e| Error::io(path, e))?;
    if version[0] != BIN_VERSION {
        return Err(Error::format(
            "recording bin",
            path,
            format!("unsupported version {}", version[0]),
        ));
    }
    let id = read_str(&mut r, path)?;
    let channel = read_str(&mut r, path)?;
    let rate = read_f64(&mut r, path)?;
    let n = read_u64(&mut r, path)? as usize;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push(read_f64(&mut r, path)?);
    }
    if samples.is_empty() {
        return Err(Error::format("recording bin", path, "no samples"));
    }
    let k = read_u64(&mut r, path)? as usize;
    let mut onsets = Vec::with_capacity(k);
    let mut offsets = Vec::with_capacity(k);
    for _ in 0..k {
        onsets.push(read_f64(&mut r, path)?);
        offsets.push(read_f64(&mut r, path)?);
    }
    Recording::new(id, channel, rate, samples, onsets, offsets)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R, path: &Path) -> Result<String> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    String::from_utf8(buf).map_err(|_| Error::format("recording bin", path, "bad utf-8"))
}

fn read_f64<R: Read>(r: &mut R, path: &Path) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u64::from_le_bytes(b))
}

/// Train/test partition of a recording's seizures, by chronological index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeizureSplit {
    pub recording_id: String,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SeizureSplit {
    pub fn new(
        recording_id: impl Into<String>,
        train_indices: Vec<usize>,
        test_indices: Vec<usize>,
        seizure_count: usize,
    ) -> Result<Self> {
        let split = SeizureSplit {
            recording_id: recording_id.into(),
            train_indices,
            test_indices,
        };
        let mut seen = vec![false; seizure_count];
        for &i in split.train_indices.iter().chain(&split.test_indices) {
            if i >= seizure_count {
                return Err(Error::invalid(format!("seizure index {i} out of range")));
            }
            if seen[i] {
                return Err(Error::invalid(format!("seizure index {i} assigned twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("split does not cover all seizures"));
        }
        if split.train_indices.is_empty() || split.test_indices.is_empty() {
            return Err(Error::invalid("split must leave both sets nonempty"));
        }
        Ok(split)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let join = |v: &[usize]| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let text = format!(
            "recording_id={}\ntrain={}\ntest={}\n",
            self.recording_id,
            join(&self.train_indices),
            join(&self.test_indices)
        );
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, seizure_count: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut id = None;
        let mut train = None;
        let mut test = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format("split file", path, format!("bad line {line:?}")))?;
            let parse_list = |v: &str| -> Result<Vec<usize>> {
                if v.trim().is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',')
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|_| {
                            Error::format("split file", path, format!("bad index {t:?}"))
                        })
                    })
                    .collect()
            };
            match key.trim() {
                "recording_id" => id = Some(value.trim().to_string()),
                "train" => train = Some(parse_list(value)?),
                "test" => test = Some(parse_list(value)?),
                other => {
                    return Err(Error::format(
                        "split file",
                        path,
                        format!("unknown key {other:?}"),
                    ))
                }
            }
        }
        let id = id.ok_or_else(|| Error::format("split file", path, "missing recording_id"))?;
        let train = train.ok_or_else(|| Error::format("split file", path, "missing train"))?;
        let test = test.ok_or_else(|| Error::format("split file", path, "missing test"))?;
        SeizureSplit::new(id, train, test, seizure_count)
    }
}

/// Chronological split: the first `ceil(2n/3)` seizures train, the rest test.
pub fn default_split(rec: &Recording) -> Result<SeizureSplit> {
    let n = rec.seizure_count();
    if n < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 seizures to split, have {n}"
        )));
    }
    let train_count = (2 * n).div_ceil(3);
    SeizureSplit::new(
        rec.id.clone(),
        (0..train_count).collect(),
        (train_count..n).collect(),
        n,
    )
}
