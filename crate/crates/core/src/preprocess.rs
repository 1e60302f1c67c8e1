//! Frequency filtering and amplitude normalization.
//!
//! Filters are designed as cascades of second-order sections (biquads) and
//! applied causally in direct form II transposed with zero initial state.
//! Butterworth bandpass design goes through the analog prototype, the
//! lowpass-to-bandpass transform, and the bilinear transform with frequency
//! pre-warping.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    fn div(self, o: Complex) -> Complex {
        let d = o.re * o.re + o.im * o.im;
        Complex::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }

    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }

    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }

    fn scale(self, k: f64) -> Complex {
        Complex::new(self.re * k, self.im * k)
    }

    fn sqrt(self) -> Complex {
        let r = self.abs();
        let re = ((r + self.re) / 2.0).max(0.0).sqrt();
        let im = ((r - self.re) / 2.0).max(0.0).sqrt();
        Complex::new(re, if self.im >= 0.0 { im } else { -im })
    }
}

/// One second-order section: H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiquadSection {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadSection {
    /// Poles strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        // |a2| < 1 and |a1| < 1 + a2 is the second-order stability triangle.
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    fn response(&self, omega: f64) -> Complex {
        let z1 = Complex::new(omega.cos(), -omega.sin());
        let z2 = z1.mul(z1);
        let num = Complex::new(self.b0, 0.0)
            .add(z1.scale(self.b1))
            .add(z2.scale(self.b2));
        let den = Complex::new(1.0, 0.0)
            .add(z1.scale(self.a1))
            .add(z2.scale(self.a2));
        num.div(den)
    }
}

/// A cascade of stable second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<BiquadSection>,
    pub description: String,
}

impl BiquadCascade {
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Complex frequency response at `freq_hz` for sampling rate `fs_hz`.
    pub fn response_at(&self, freq_hz: f64, fs_hz: f64) -> (f64, f64) {
        let omega = 2.0 * PI * freq_hz / fs_hz;
        let mut h = Complex::new(1.0, 0.0);
        for s in &self.sections {
            h = h.mul(s.response(omega));
        }
        (h.re, h.im)
    }

    /// Magnitude response in dB at `freq_hz`.
    pub fn gain_db(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        let (re, im) = self.response_at(freq_hz, fs_hz);
        20.0 * re.hypot(im).log10()
    }

    /// Chain another cascade after this one.
    pub fn then(mut self, other: &BiquadCascade) -> BiquadCascade {
        self.sections.extend_from_slice(&other.sections);
        self.description = format!("{} + {}", self.description, other.description);
        self
    }
}

/// Butterworth bandpass of the given total order (2 sections per 4th order).
pub fn design_butterworth_bandpass(
    low_hz: f64,
    high_hz: f64,
    order: usize,
    fs_hz: f64,
) -> Result<BiquadCascade> {
    if !(fs_hz > 0.0) {
        return Err(Error::invalid("sampling rate must be positive"));
    }
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs_hz / 2.0) {
        return Err(Error::invalid(format!(
            "band edges must satisfy 0 < low < high < fs/2, got ({low_hz}, {high_hz}) at fs {fs_hz}"
        )));
    }
    if !matches!(order, 2 | 4 | 6 | 8) {
        return Err(Error::invalid(format!(
            "bandpass order must be one of 2, 4, 6, 8, got {order}"
        )));
    }
    let n = order / 2; // analog lowpass prototype order

    // Prototype poles on the unit circle in the left half-plane.
    let mut proto = Vec::with_capacity(n);
    for k in 0..n {
        let theta = PI * (2 * k + 1) as f64 / (2 * n) as f64 + PI / 2.0;
        proto.push(Complex::new(theta.cos(), theta.sin()));
    }

    // Pre-warped analog band edges.
    let w1 = 2.0 * fs_hz * (PI * low_hz / fs_hz).tan();
    let w2 = 2.0 * fs_hz * (PI * high_hz / fs_hz).tan();
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    // Lowpass-to-bandpass: each prototype pole spawns a conjugate-free pair.
    let mut analog_poles = Vec::with_capacity(2 * n);
    for p in proto {
        let a = p.scale(bw / 2.0);
        let disc = a.mul(a).sub(Complex::new(w0 * w0, 0.0)).sqrt();
        analog_poles.push(a.add(disc));
        analog_poles.push(a.sub(disc));
    }

    // Bilinear transform z = (2fs + s) / (2fs - s).
    let two_fs = Complex::new(2.0 * fs_hz, 0.0);
    let digital_poles: Vec<Complex> = analog_poles
        .iter()
        .map(|&s| two_fs.add(s).div(two_fs.sub(s)))
        .collect();

    // Pair conjugates into sections; real poles (if any) pair with each other.
    let mut upper: Vec<Complex> = digital_poles
        .iter()
        .copied()
        .filter(|p| p.im > 1e-12)
        .collect();
    let mut reals: Vec<f64> = digital_poles
        .iter()
        .filter(|p| p.im.abs() <= 1e-12)
        .map(|p| p.re)
        .collect();
    upper.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut sections = Vec::with_capacity(n);
    for p in upper {
        sections.push(BiquadSection {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1: -2.0 * p.re,
            a2: p.re * p.re + p.im * p.im,
        });
    }
    while reals.len() >= 2 {
        let r2 = reals.pop().unwrap();
        let r1 = reals.pop().unwrap();
        sections.push(BiquadSection {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1: -(r1 + r2),
            a2: r1 * r2,
        });
    }
    debug_assert_eq!(sections.len(), n);

    // Normalize to unit gain at the warped band center, split across sections.
    let center_hz = (w0 / (2.0 * fs_hz)).atan() * fs_hz / PI;
    let mut cascade = BiquadCascade {
        sections,
        description: format!("butterworth bandpass {low_hz}-{high_hz} Hz order {order}"),
    };
    let (re, im) = cascade.response_at(center_hz, fs_hz);
    let g = re.hypot(im);
    let per_section = (1.0 / g).powf(1.0 / n as f64);
    for s in &mut cascade.sections {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }

    for s in &cascade.sections {
        if !s.is_stable() {
            return Err(Error::invalid(format!(
                "designed section unstable: a1={} a2={}",
                s.a1, s.a2
            )));
        }
    }
    Ok(cascade)
}

/// Second-order notch at `center_hz` with the given -3 dB bandwidth.
pub fn design_notch(center_hz: f64, bandwidth_hz: f64, fs_hz: f64) -> Result<BiquadCascade> {
    if !(center_hz > 0.0 && center_hz < fs_hz / 2.0) {
        return Err(Error::invalid(format!(
            "notch center must lie in (0, fs/2), got {center_hz} at fs {fs_hz}"
        )));
    }
    if !(bandwidth_hz > 0.0 && bandwidth_hz < center_hz) {
        return Err(Error::invalid(format!(
            "notch bandwidth must lie in (0, center), got {bandwidth_hz}"
        )));
    }
    let omega = 2.0 * PI * center_hz / fs_hz;
    let q = center_hz / bandwidth_hz;
    let alpha = omega.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let section = BiquadSection {
        b0: 1.0 / a0,
        b1: -2.0 * omega.cos() / a0,
        b2: 1.0 / a0,
        a1: -2.0 * omega.cos() / a0,
        a2: (1.0 - alpha) / a0,
    };
    debug_assert!(section.is_stable());
    Ok(BiquadCascade {
        sections: vec![section],
        description: format!("notch {center_hz} Hz bw {bandwidth_hz} Hz"),
    })
}

/// Causal single-pass filtering, direct form II transposed, zero initial state.
pub fn apply_filter(cascade: &BiquadCascade, input: &[f64]) -> Result<Vec<f64>> {
    if let Some(index) = input.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    let mut out = input.to_vec();
    for s in &cascade.sections {
        let mut z1 = 0.0;
        let mut z2 = 0.0;
        for x in out.iter_mut() {
            let y = s.b0 * *x + z1;
            z1 = s.b1 * *x - s.a1 * y + z2;
            z2 = s.b2 * *x - s.a2 * y;
            *x = y;
        }
    }
    Ok(out)
}

/// Forward-backward filtering; zero phase, squared magnitude response.
pub fn apply_filter_zero_phase(cascade: &BiquadCascade, input: &[f64]) -> Result<Vec<f64>> {
    let mut out = apply_filter(cascade, input)?;
    out.reverse();
    let mut out = apply_filter(cascade, &out)?;
    out.reverse();
    Ok(out)
}

/// Divide by the maximum absolute value, mapping into [-1, 1].
pub fn normalize_max_abs(input: &[f64]) -> Result<Vec<f64>> {
    if input.is_empty() {
        return Err(Error::invalid("empty signal"));
    }
    let max = input.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Err(Error::invalid("degenerate signal: all zeros"));
    }
    Ok(input.iter().map(|x| x / max).collect())
}
