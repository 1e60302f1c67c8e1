//! Timeline labeling, window extraction, and class balancing.
//!
//! The recording timeline is partitioned into preictal / ictal / excluded
//! (postictal buffer) / interictal intervals. Interictal windows are cut
//! without overlap; preictal windows with 50% overlap. All intervals are
//! half-open `[start, end)` in seconds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::recording::Recording;

/// Default postictal exclusion after each seizure offset, in seconds.
pub const DEFAULT_POSTICTAL_BUFFER_S: f64 = 30.0 * 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Interval { start_s, end_s }
    }

    pub fn len_s(&self) -> f64 {
        (self.end_s - self.start_s).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.end_s <= self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowLabel {
    Interictal,
    Preictal,
}

impl WindowLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            WindowLabel::Interictal => "interictal",
            WindowLabel::Preictal => "preictal",
        }
    }
}

/// One labeled fixed-length window, addressed by sample index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentWindow {
    pub recording_id: String,
    pub start_sample: usize,
    pub length: usize,
    pub label: WindowLabel,
    /// Preictal: the seizure this window precedes. Interictal: the nearest
    /// following seizure (grouping key for balancing), if any.
    pub source_seizure: Option<usize>,
}

/// Partition of the timeline into the four region kinds.
#[derive(Debug, Clone)]
pub struct IntervalLabeling {
    pub preictal_minutes: u32,
    pub postictal_buffer_s: f64,
    pub duration_s: f64,
    /// `(seizure_index, interval)` pairs.
    pub preictal: Vec<(usize, Interval)>,
    pub ictal: Vec<(usize, Interval)>,
    pub excluded: Vec<(usize, Interval)>,
    pub interictal: Vec<Interval>,
    /// Seizures whose preictal interval was entirely clipped away.
    pub seizures_without_preictal: Vec<usize>,
}

impl IntervalLabeling {
    /// True if `t` lies in any ictal or postictal-exclusion interval.
    pub fn is_excluded_time(&self, t: f64) -> bool {
        self.ictal.iter().any(|(_, iv)| iv.contains(t))
            || self.excluded.iter().any(|(_, iv)| iv.contains(t))
    }

    pub fn total_interictal_s(&self) -> f64 {
        self.interictal.iter().map(|iv| iv.len_s()).sum()
    }
}

/// Label the timeline for a given preictal duration.
pub fn label_intervals(rec: &Recording, preictal_minutes: u32) -> Result<IntervalLabeling> {
    label_intervals_with_buffer(rec, preictal_minutes, DEFAULT_POSTICTAL_BUFFER_S)
}

pub fn label_intervals_with_buffer(
    rec: &Recording,
    preictal_minutes: u32,
    postictal_buffer_s: f64,
) -> Result<IntervalLabeling> {
    if preictal_minutes == 0 {
        return Err(Error::invalid("preictal duration must be positive"));
    }
    if postictal_buffer_s < 0.0 {
        return Err(Error::invalid("postictal buffer must be non-negative"));
    }
    let duration = rec.duration_s();
    let preictal_s = preictal_minutes as f64 * 60.0;

    let mut preictal = Vec::new();
    let mut ictal = Vec::new();
    let mut excluded = Vec::new();
    let mut seizures_without_preictal = Vec::new();

    let n = rec.seizure_count();
    for i in 0..n {
        let onset = rec.seizure_onsets_s[i];
        let offset = rec.seizure_offsets_s[i];

        // Preictal start cannot reach into the previous seizure's exclusion zone.
        let floor = if i == 0 {
            0.0
        } else {
            (rec.seizure_offsets_s[i - 1] + postictal_buffer_s).min(onset)
        };
        let pre = Interval::new((onset - preictal_s).max(floor), onset);
        if pre.is_empty() {
            seizures_without_preictal.push(i);
        } else {
            preictal.push((i, pre));
        }

        ictal.push((i, Interval::new(onset, offset.min(duration))));

        let excl_end = if i + 1 < n {
            (offset + postictal_buffer_s).min(rec.seizure_onsets_s[i + 1])
        } else {
            (offset + postictal_buffer_s).min(duration)
        };
        let excl = Interval::new(offset, excl_end);
        if !excl.is_empty() {
            excluded.push((i, excl));
        }
    }

    // Interictal is the complement of everything above.
    let mut covered: Vec<Interval> = preictal
        .iter()
        .chain(&ictal)
        .chain(&excluded)
        .map(|&(_, iv)| iv)
        .collect();
    covered.sort_by(|a, b| a.start_s.partial_cmp(&b.start_s).unwrap());
    let mut interictal = Vec::new();
    let mut cursor = 0.0;
    for iv in covered {
        if iv.start_s > cursor {
            interictal.push(Interval::new(cursor, iv.start_s));
        }
        cursor = cursor.max(iv.end_s);
    }
    if cursor < duration {
        interictal.push(Interval::new(cursor, duration));
    }

    Ok(IntervalLabeling {
        preictal_minutes,
        postictal_buffer_s,
        duration_s: duration,
        preictal,
        ictal,
        excluded,
        interictal,
        seizures_without_preictal,
    })
}

/// Index of the first seizure with onset at or after `t`, if any.
fn next_seizure_after(rec: &Recording, t: f64) -> Option<usize> {
    rec.seizure_onsets_s.iter().position(|&on| on >= t)
}

fn window_len(rec: &Recording) -> usize {
    (rec.sampling_rate_hz).round() as usize
}

/// Sample span `[first, last)` fully inside the interval.
fn sample_span(iv: &Interval, fs: f64, total: usize) -> (usize, usize) {
    let first = (iv.start_s * fs - 1e-6).ceil().max(0.0) as usize;
    let last = ((iv.end_s * fs + 1e-6).floor() as usize).min(total);
    (first, last.max(first))
}

/// Non-overlapping one-second windows over interictal intervals; tails dropped.
pub fn window_interictal(lab: &IntervalLabeling, rec: &Recording) -> Vec<SegmentWindow> {
    let len = window_len(rec);
    let mut out = Vec::new();
    for iv in &lab.interictal {
        let (first, last) = sample_span(iv, rec.sampling_rate_hz, rec.samples.len());
        let group = next_seizure_after(rec, iv.start_s);
        let mut start = first;
        while start + len <= last {
            out.push(SegmentWindow {
                recording_id: rec.id.clone(),
                start_sample: start,
                length: len,
                label: WindowLabel::Interictal,
                source_seizure: group,
            });
            start += len;
        }
    }
    out
}

/// 50%-overlapping one-second windows over preictal intervals.
pub fn window_preictal(lab: &IntervalLabeling, rec: &Recording) -> Vec<SegmentWindow> {
    let len = window_len(rec);
    let stride = len / 2;
    let mut out = Vec::new();
    for &(seizure, iv) in &lab.preictal {
        let (first, last) = sample_span(&iv, rec.sampling_rate_hz, rec.samples.len());
        let mut start = first;
        while start + len <= last {
            out.push(SegmentWindow {
                recording_id: rec.id.clone(),
                start_sample: start,
                length: len,
                label: WindowLabel::Preictal,
                source_seizure: Some(seizure),
            });
            start += stride;
        }
    }
    out
}

/// Equalize class counts: the larger class is subsampled evenly across its
/// per-seizure groups, uniformly within each group, deterministic per seed.
pub fn balance_classes(
    preictal: &[SegmentWindow],
    interictal: &[SegmentWindow],
    seed: u64,
) -> Result<Vec<SegmentWindow>> {
    if preictal.is_empty() {
        return Err(Error::invalid("no preictal windows to balance"));
    }
    if interictal.is_empty() {
        return Err(Error::invalid("no interictal windows to balance"));
    }
    let target = preictal.len().min(interictal.len());
    let mut out = Vec::with_capacity(2 * target);
    if preictal.len() > target {
        out.extend(subsample_grouped(preictal, target, seed));
        out.extend_from_slice(interictal);
    } else if interictal.len() > target {
        out.extend_from_slice(preictal);
        out.extend(subsample_grouped(interictal, target, seed));
    } else {
        out.extend_from_slice(preictal);
        out.extend_from_slice(interictal);
    }
    out.sort_by_key(|w| (w.start_sample, w.label == WindowLabel::Preictal));
    Ok(out)
}

fn subsample_grouped(windows: &[SegmentWindow], target: usize, seed: u64) -> Vec<SegmentWindow> {
    // Group by source seizure; earliest groups absorb the rounding remainder.
    let mut keys: Vec<Option<usize>> = windows.iter().map(|w| w.source_seizure).collect();
    keys.sort_by_key(|k| k.map_or(usize::MAX, |i| i));
    keys.dedup();

    let mut groups: Vec<Vec<&SegmentWindow>> = keys
        .iter()
        .map(|k| windows.iter().filter(|w| w.source_seizure == *k).collect())
        .collect();
    // Input-order independence: fix each group's internal order first.
    for g in &mut groups {
        g.sort_by_key(|w| w.start_sample);
    }

    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let mut take = vec![0usize; groups.len()];
    let mut remaining = target;
    while remaining > 0 {
        let open: Vec<usize> = (0..groups.len()).filter(|&i| take[i] < sizes[i]).collect();
        if open.is_empty() {
            break;
        }
        let share = remaining / open.len();
        let extra = remaining % open.len();
        for (j, &gi) in open.iter().enumerate() {
            let want = share + usize::from(j < extra);
            let add = want.min(sizes[gi] - take[gi]);
            take[gi] += add;
            remaining -= add;
        }
    }

    let mut out = Vec::with_capacity(target);
    for (gi, group) in groups.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((gi as u64 + 1) << 32));
        let mut indices: Vec<usize> = (0..group.len()).collect();
        indices.shuffle(&mut rng);
        indices.truncate(take[gi]);
        indices.sort_unstable();
        out.extend(indices.into_iter().map(|i| group[i].clone()));
    }
    out
}

const WINDOWS_MAGIC: &[u8; 8] = b"ICTUSWND";

/// A window set on disk: provenance header plus a binary index of
/// `(start_sample, label, source_seizure)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub recording_id: String,
    pub window_length: usize,
    pub config_hash: String,
    pub windows: Vec<SegmentWindow>,
}

impl WindowSet {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let res: std::io::Result<()> = (|| {
            w.write_all(WINDOWS_MAGIC)?;
            w.write_all(&(self.recording_id.len() as u32).to_le_bytes())?;
            w.write_all(self.recording_id.as_bytes())?;
            w.write_all(&(self.config_hash.len() as u32).to_le_bytes())?;
            w.write_all(self.config_hash.as_bytes())?;
            w.write_all(&(self.window_length as u64).to_le_bytes())?;
            w.write_all(&(self.windows.len() as u64).to_le_bytes())?;
            for win in &self.windows {
                w.write_all(&(win.start_sample as u64).to_le_bytes())?;
                w.write_all(&[match win.label {
                    WindowLabel::Interictal => 0,
                    WindowLabel::Preictal => 1,
                }])?;
                let src = win.source_seizure.map_or(-1i32, |s| s as i32);
                w.write_all(&src.to_le_bytes())?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<WindowSet> {
        use std::io::Read;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = std::io::BufReader::new(file);
        let mut read = |buf: &mut [u8]| -> Result<()> {
            r.read_exact(buf).map_err(|e| Error::io(path, e))
        };
        let mut magic = [0u8; 8];
        read(&mut magic)?;
        if &magic != WINDOWS_MAGIC {
            return Err(Error::format("window set", path, "bad magic"));
        }
        let mut u32b = [0u8; 4];
        read(&mut u32b)?;
        let mut id = vec![0u8; u32::from_le_bytes(u32b) as usize];
        read(&mut id)?;
        read(&mut u32b)?;
        let mut hash = vec![0u8; u32::from_le_bytes(u32b) as usize];
        read(&mut hash)?;
        let mut u64b = [0u8; 8];
        read(&mut u64b)?;
        let window_length = u64::from_le_bytes(u64b) as usize;
        read(&mut u64b)?;
        let count = u64::from_le_bytes(u64b) as usize;
        let recording_id = String::from_utf8(id)
            .map_err(|_| Error::format("window set", path, "bad utf-8"))?;
        let config_hash = String::from_utf8(hash)
            .map_err(|_| Error::format("window set", path, "bad utf-8"))?;
        let mut windows = Vec::with_capacity(count);
        for _ in 0..count {
            read(&mut u64b)?;
            let start_sample = u64::from_le_bytes(u64b) as usize;
            let mut lbl = [0u8; 1];
            read(&mut lbl)?;
            let label = match lbl[0] {
                0 => WindowLabel::Interictal,
                1 => WindowLabel::Preictal,
                other => {
                    return Err(Error::format(
                        "window set",
                        path,
                        format!("bad label byte {other}"),
                    ))
                }
            };
            read(&mut u32b)?;
            let src = i32::from_le_bytes(u32b);
            windows.push(SegmentWindow {
                recording_id: recording_id.clone(),
                start_sample,
                length: window_length,
                label,
                source_seizure: (src >= 0).then_some(src as usize),
            });
        }
        Ok(WindowSet {
            recording_id,
            window_length,
            config_hash,
            windows,
        })
    }
}
