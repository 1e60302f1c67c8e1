//! Forward and backward passes for the compact two-class CNN.
//!
//! Layer stack: average-pool downsample -> conv 5x5 (8 filters, ReLU) ->
//! maxpool 2 -> conv 3x3 (16 filters, ReLU) -> maxpool 2 -> fully connected
//! -> softmax. All math in f64, plain loops over flat buffers.

use crate::error::{Error, Result};

pub const CONV1_FILTERS: usize = 8;
pub const CONV1_KERNEL: usize = 5;
pub const CONV2_FILTERS: usize = 16;
pub const CONV2_KERNEL: usize = 3;
pub const CLASS_COUNT: usize = 2;

/// Shape bookkeeping for the fixed architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shapes {
    pub input_size: usize,
    pub channels: usize,
    pub downsample: usize,
    pub pooled: usize, // input_size / downsample
    pub conv1_out: usize,
    pub pool1_out: usize,
    pub conv2_out: usize,
    pub pool2_out: usize,
    pub flat: usize,
}

impl Shapes {
    pub fn for_input(input_size: usize, channels: usize, downsample: usize) -> Result<Shapes> {
        if downsample == 0 || input_size % downsample != 0 {
            return Err(Error::invalid(format!(
                "input size {input_size} not divisible by downsample factor {downsample}"
            )));
        }
        let pooled = input_size / downsample;
        if pooled <= CONV1_KERNEL {
            return Err(Error::invalid(format!(
                "downsampled input {pooled} too small for a {CONV1_KERNEL}x{CONV1_KERNEL} kernel"
            )));
        }
        let conv1_out = pooled - CONV1_KERNEL + 1;
        if conv1_out % 2 != 0 {
            return Err(Error::invalid(format!(
                "input size {input_size} not divisible by pooling strides (conv1 output {conv1_out} is odd)"
            )));
        }
        let pool1_out = conv1_out / 2;
        if pool1_out <= CONV2_KERNEL {
            return Err(Error::invalid("input too small after first pooling stage"));
        }
        let conv2_out = pool1_out - CONV2_KERNEL + 1;
        if conv2_out % 2 != 0 {
            return Err(Error::invalid(format!(
                "input size {input_size} not divisible by pooling strides (conv2 output {conv2_out} is odd)"
            )));
        }
        let pool2_out = conv2_out / 2;
        Ok(Shapes {
            input_size,
            channels,
            downsample,
            pooled,
            conv1_out,
            pool1_out,
            conv2_out,
            pool2_out,
            flat: pool2_out * pool2_out * CONV2_FILTERS,
        })
    }

    pub fn param_count(&self) -> usize {
        let c1 = CONV1_FILTERS * CONV1_KERNEL * CONV1_KERNEL * self.channels + CONV1_FILTERS;
        let c2 = CONV2_FILTERS * CONV2_KERNEL * CONV2_KERNEL * CONV1_FILTERS + CONV2_FILTERS;
        let fc = CLASS_COUNT * self.flat + CLASS_COUNT;
        c1 + c2 + fc
    }

    pub fn offsets(&self) -> ParamOffsets {
        let c1w = 0;
        let c1b = c1w + CONV1_FILTERS * CONV1_KERNEL * CONV1_KERNEL * self.channels;
        let c2w = c1b + CONV1_FILTERS;
        let c2b = c2w + CONV2_FILTERS * CONV2_KERNEL * CONV2_KERNEL * CONV1_FILTERS;
        let fcw = c2b + CONV2_FILTERS;
        let fcb = fcw + CLASS_COUNT * self.flat;
        ParamOffsets { c1w, c1b, c2w, c2b, fcw, fcb }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamOffsets {
    pub c1w: usize,
    pub c1b: usize,
    pub c2w: usize,
    pub c2b: usize,
    pub fcw: usize,
    pub fcb: usize,
}

/// Average-pool an interleaved `size x size x C` [0,1] image down by `d`.
pub fn downsample_input(pixels01: &[f64], shapes: &Shapes) -> Vec<f64> {
    let (n, c, d, h) = (shapes.input_size, shapes.channels, shapes.downsample, shapes.pooled);
    let mut out = vec![0.0; h * h * c];
    let norm = 1.0 / (d * d) as f64;
    for i in 0..h {
        for j in 0..h {
            for ch in 0..c {
                let mut acc = 0.0;
                for di in 0..d {
                    for dj in 0..d {
                        acc += pixels01[((i * d + di) * n + (j * d + dj)) * c + ch];
                    }
                }
                out[(i * h + j) * c + ch] = acc * norm;
            }
        }
    }
    out
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    pub z1: Vec<f64>,
    pub p1: Vec<f64>,
    pub argmax1: Vec<usize>,
    pub z2: Vec<f64>,
    pub p2: Vec<f64>,
    pub argmax2: Vec<usize>,
    pub probs: [f64; CLASS_COUNT],
}

/// Forward pass over a pooled input; returns softmax probabilities.
pub fn forward(params: &[f64], input: &[f64], shapes: &Shapes) -> ForwardCache {
    let off = shapes.offsets();
    let c = shapes.channels;
    let h = shapes.pooled;
    let o1 = shapes.conv1_out;

    // conv1 + ReLU
    let mut z1 = vec![0.0; o1 * o1 * CONV1_FILTERS];
    for i in 0..o1 {
        for j in 0..o1 {
            for f in 0..CONV1_FILTERS {
                let mut acc = params[off.c1b + f];
                let wbase = off.c1w + f * CONV1_KERNEL * CONV1_KERNEL * c;
                for ki in 0..CONV1_KERNEL {
                    for kj in 0..CONV1_KERNEL {
                        let ibase = ((i + ki) * h + (j + kj)) * c;
                        let wrow = wbase + (ki * CONV1_KERNEL + kj) * c;
                        for ch in 0..c {
                            acc += params[wrow + ch] * input[ibase + ch];
                        }
                    }
                }
                z1[(i * o1 + j) * CONV1_FILTERS + f] = acc;
            }
        }
    }

    // maxpool over ReLU(z1)
    let m1 = shapes.pool1_out;
    let mut p1 = vec![0.0; m1 * m1 * CONV1_FILTERS];
    let mut argmax1 = vec![0usize; m1 * m1 * CONV1_FILTERS];
    max_pool_relu(&z1, o1, CONV1_FILTERS, &mut p1, &mut argmax1);

    // conv2 + ReLU
    let o2 = shapes.conv2_out;
    let mut z2 = vec![0.0; o2 * o2 * CONV2_FILTERS];
    for i in 0..o2 {
        for j in 0..o2 {
            for f in 0..CONV2_FILTERS {
                let mut acc = params[off.c2b + f];
                let wbase = off.c2w + f * CONV2_KERNEL * CONV2_KERNEL * CONV1_FILTERS;
                for ki in 0..CONV2_KERNEL {
                    for kj in 0..CONV2_KERNEL {
                        let ibase = ((i + ki) * m1 + (j + kj)) * CONV1_FILTERS;
                        let wrow = wbase + (ki * CONV2_KERNEL + kj) * CONV1_FILTERS;
                        for ch in 0..CONV1_FILTERS {
                            acc += params[wrow + ch] * p1[ibase + ch];
                        }
                    }
                }
                z2[(i * o2 + j) * CONV2_FILTERS + f] = acc;
            }
        }
    }

    let m2 = shapes.pool2_out;
    let mut p2 = vec![0.0; m2 * m2 * CONV2_FILTERS];
    let mut argmax2 = vec![0usize; m2 * m2 * CONV2_FILTERS];
    max_pool_relu(&z2, o2, CONV2_FILTERS, &mut p2, &mut argmax2);

    // fully connected + softmax
    let mut logits = [0.0; CLASS_COUNT];
    for cls in 0..CLASS_COUNT {
        let mut acc = params[off.fcb + cls];
        let wbase = off.fcw + cls * shapes.flat;
        for x in 0..shapes.flat {
            acc += params[wbase + x] * p2[x];
        }
        logits[cls] = acc;
    }
    let max = logits[0].max(logits[1]);
    let e0 = (logits[0] - max).exp();
    let e1 = (logits[1] - max).exp();
    let sum = e0 + e1;
    let probs = [e0 / sum, e1 / sum];

    ForwardCache { z1, p1, argmax1, z2, p2, argmax2, probs }
}

fn max_pool_relu(z: &[f64], side: usize, filters: usize, out: &mut [f64], argmax: &mut [usize]) {
    let m = side / 2;
    for i in 0..m {
        for j in 0..m {
            for f in 0..filters {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for di in 0..2 {
                    for dj in 0..2 {
                        let idx = ((2 * i + di) * side + (2 * j + dj)) * filters + f;
                        let v = z[idx].max(0.0);
                        if v > best {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                out[(i * m + j) * filters + f] = best;
                argmax[(i * m + j) * filters + f] = best_idx;
            }
        }
    }
}

/// Cross-entropy loss for the cached forward pass.
pub fn loss_of(cache: &ForwardCache, label: usize) -> f64 {
    -(cache.probs[label].max(1e-300)).ln()
}

/// Accumulate d(loss)/d(params) into `grad` for one example.
pub fn backward(
    params: &[f64],
    input: &[f64],
    cache: &ForwardCache,
    label: usize,
    shapes: &Shapes,
    grad: &mut [f64],
) {
    let off = shapes.offsets();
    let c = shapes.channels;
    let h = shapes.pooled;
    let o1 = shapes.conv1_out;
    let m1 = shapes.pool1_out;
    let o2 = shapes.conv2_out;

    // softmax + cross-entropy
    let mut dlogits = [cache.probs[0], cache.probs[1]];
    dlogits[label] -= 1.0;

    // fully connected
    let mut dp2 = vec![0.0; shapes.flat];
    for cls in 0..CLASS_COUNT {
        let wbase = off.fcw + cls * shapes.flat;
        let d = dlogits[cls];
        grad[off.fcb + cls] += d;
        for x in 0..shapes.flat {
            grad[wbase + x] += d * cache.p2[x];
            dp2[x] += params[wbase + x] * d;
        }
    }

    // unpool2 (+ ReLU mask via max(0) already applied at pooling: gradient only
    // flows where the pooled value came from a positive pre-activation)
    let mut dz2 = vec![0.0; o2 * o2 * CONV2_FILTERS];
    for (slot, &src) in cache.argmax2.iter().enumerate() {
        if cache.z2[src] > 0.0 {
            dz2[src] += dp2[slot];
        }
    }

    // conv2
    let mut dp1 = vec![0.0; m1 * m1 * CONV1_FILTERS];
    for i in 0..o2 {
        for j in 0..o2 {
            for f in 0..CONV2_FILTERS {
                let d = dz2[(i * o2 + j) * CONV2_FILTERS + f];
                if d == 0.0 {
                    continue;
                }
                grad[off.c2b + f] += d;
                let wbase = off.c2w + f * CONV2_KERNEL * CONV2_KERNEL * CONV1_FILTERS;
                for ki in 0..CONV2_KERNEL {
                    for kj in 0..CONV2_KERNEL {
                        let ibase = ((i + ki) * m1 + (j + kj)) * CONV1_FILTERS;
                        let wrow = wbase + (ki * CONV2_KERNEL + kj) * CONV1_FILTERS;
                        for ch in 0..CONV1_FILTERS {
                            grad[wrow + ch] += d * cache.p1[ibase + ch];
                            dp1[ibase + ch] += d * params[wrow + ch];
                        }
                    }
                }
            }
        }
    }

    // unpool1
    let mut dz1 = vec![0.0; o1 * o1 * CONV1_FILTERS];
    for (slot, &src) in cache.argmax1.iter().enumerate() {
        if cache.z1[src] > 0.0 {
            dz1[src] += dp1[slot];
        }
    }

    // conv1 (input gradient not needed)
    for i in 0..o1 {
        for j in 0..o1 {
            for f in 0..CONV1_FILTERS {
                let d = dz1[(i * o1 + j) * CONV1_FILTERS + f];
                if d == 0.0 {
                    continue;
                }
                grad[off.c1b + f] += d;
                let wbase = off.c1w + f * CONV1_KERNEL * CONV1_KERNEL * c;
                for ki in 0..CONV1_KERNEL {
                    for kj in 0..CONV1_KERNEL {
                        let ibase = ((i + ki) * h + (j + kj)) * c;
                        let wrow = wbase + (ki * CONV1_KERNEL + kj) * c;
                        for ch in 0..c {
                            grad[wrow + ch] += d * input[ibase + ch];
                        }
                    }
                }
            }
        }
    }
}
