use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm::{gemm, gemm_ld};
use crate::error::{Error, Result};

/// One layer of a [`NetworkSpec`].
///
/// Convolution and pooling layers act on `[C, D, H, W]` tensors, dense
/// layers on `[N, F]` batches. The skip markers implement additive and
/// concatenating skip connections through a stack: `SkipSave` pushes the
/// current activation, `SkipAdd` / `SkipConcat` pop it and merge it into the
/// current activation (concatenation is along the channel axis, popped first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv3d { in_channels: usize, out_channels: usize, kernel: usize, padding: usize },
    Dense { inputs: usize, outputs: usize },
    Relu,
    LeakyRelu(f64),
    SkipSave,
    SkipAdd,
    SkipConcat,
    /// 2x2 average pooling over the spatial `H, W` axes.
    AvgPool2,
    /// 2x nearest-neighbour upsampling over the spatial `H, W` axes.
    Upsample2,
}

impl LayerSpec {
    /// Shapes of the learnable parameters (weight, bias), if any.
    pub fn parameter_shapes(&self) -> Option<[Vec<usize>; 2]> {
        match *self {
            LayerSpec::Conv3d { in_channels, out_channels, kernel, .. } => Some([
                vec![out_channels, in_channels, kernel, kernel, kernel],
                vec![out_channels],
            ]),
            LayerSpec::Dense { inputs, outputs } => Some([vec![outputs, inputs], vec![outputs]]),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv3d { in_channels, kernel, .. } => in_channels * kernel * kernel * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }
}

/// Ordered layer list describing an architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        Self { layers }
    }

    /// Residual 3D CNN on single-channel volumes: `conv_layers` convolutions
    /// of width `hidden` with ReLU in between, linear last layer, and a global
    /// additive skip from the input.
    pub fn residual_cnn(hidden: usize, conv_layers: usize, kernel: usize) -> Self {
        assert!(conv_layers >= 2, "a residual CNN needs at least two convolutions");
        let padding = kernel / 2;
        let mut layers = vec![LayerSpec::SkipSave];
        let mut in_channels = 1;
        for i in 0..conv_layers {
            let out_channels = if i + 1 == conv_layers { 1 } else { hidden };
            layers.push(LayerSpec::Conv3d { in_channels, out_channels, kernel, padding });
            if i + 1 != conv_layers {
                layers.push(LayerSpec::Relu);
            }
            in_channels = out_channels;
        }
        layers.push(LayerSpec::SkipAdd);
        Self { layers }
    }

    /// Plain MLP: `hidden_layers` ReLU layers of width `hidden`, linear output.
    pub fn mlp(inputs: usize, hidden: usize, hidden_layers: usize, outputs: usize) -> Self {
        let mut layers = Vec::new();
        let mut width = inputs;
        for _ in 0..hidden_layers {
            layers.push(LayerSpec::Dense { inputs: width, outputs: hidden });
            layers.push(LayerSpec::Relu);
            width = hidden;
        }
        layers.push(LayerSpec::Dense { inputs: width, outputs });
        Self { layers }
    }

    /// Check adjacent layers for compatibility given the input channel (or
    /// feature) count; returns the output channel count.
    pub fn validate(&self, input_channels: usize) -> Result<usize> {
        let mut channels = input_channels;
        let mut stack = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let mismatch = |expected: usize, got: usize| {
                Error::InvalidConfig(format!("layer {i}: expects {expected} input channels, gets {got}"))
            };
            match *layer {
                LayerSpec::Conv3d { in_channels, out_channels, kernel, .. } => {
                    if in_channels != channels {
                        return Err(mismatch(in_channels, channels));
                    }
                    if kernel == 0 || out_channels == 0 {
                        return Err(Error::InvalidConfig(format!("layer {i}: degenerate convolution")));
                    }
                    channels = out_channels;
                }
                LayerSpec::Dense { inputs, outputs } => {
                    if inputs != channels {
                        return Err(mismatch(inputs, channels));
                    }
                    if outputs == 0 {
                        return Err(Error::InvalidConfig(format!("layer {i}: zero-width dense layer")));
                    }
                    channels = outputs;
                }
                LayerSpec::LeakyRelu(slope) if !slope.is_finite() => {
                    return Err(Error::InvalidConfig(format!("layer {i}: non-finite slope")));
                }
                LayerSpec::Relu | LayerSpec::LeakyRelu(_) | LayerSpec::AvgPool2 | LayerSpec::Upsample2 => {}
                LayerSpec::SkipSave => stack.push(channels),
                LayerSpec::SkipAdd => {
                    let saved = stack
                        .pop()
                        .ok_or_else(|| Error::InvalidConfig(format!("layer {i}: skip without save")))?;
                    if saved != channels {
                        return Err(mismatch(saved, channels));
                    }
                }
                LayerSpec::SkipConcat => {
                    let saved = stack
                        .pop()
                        .ok_or_else(|| Error::InvalidConfig(format!("layer {i}: skip without save")))?;
                    channels += saved;
                }
            }
        }
        if !stack.is_empty() {
            return Err(Error::InvalidConfig("unbalanced skip connections".into()));
        }
        Ok(channels)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(LayerSpec::parameter_shapes)
            .map(|shapes| shapes.iter().map(|s| s.iter().product::<usize>()).sum::<usize>())
            .sum()
    }
}

/// Geometry of a `[C, D, H, W]` convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub padding: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
}

impl ConvDims {
    pub fn out_dims(&self) -> (usize, usize, usize) {
        let grow = 2 * self.padding + 1;
        (self.d + grow - self.kernel, self.h + grow - self.kernel, self.w + grow - self.kernel)
    }

    fn rows(&self) -> usize {
        self.c_in * self.kernel * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        let (od, oh, ow) = self.out_dims();
        od * oh * ow
    }
}

/// Output columns per im2col tile; keeps the column buffer cache-sized.
const TILE_COLS: usize = 512;

/// Unfold the input patches of output rows `r0..r1` (a row is one `(z, y)`
/// pair) into a `[C_in*k^3, (r1-r0)*W']` matrix.
fn im2col(input: &[f64], dims: &ConvDims, r0: usize, r1: usize, cols: &mut [f64]) {
    let ConvDims { c_in, kernel: k, padding: p, d, h, w, .. } = *dims;
    let (_, oh, ow) = dims.out_dims();
    let n = (r1 - r0) * ow;
    let mut row = 0;
    for c in 0..c_in {
        let plane = &input[c * d * h * w..(c + 1) * d * h * w];
        for kd in 0..k {
            for kh in 0..k {
                for kw in 0..k {
                    let dst = &mut cols[row * n..(row + 1) * n];
                    // Valid output range along w for this kernel offset.
                    let w_lo = p.saturating_sub(kw).min(ow);
                    let w_hi = (w + p).saturating_sub(kw).min(ow).max(w_lo);
                    for r in r0..r1 {
                        let (iz, iy) = (r / oh + kd, r % oh + kh);
                        let out = &mut dst[(r - r0) * ow..(r - r0 + 1) * ow];
                        if iz < p || iz - p >= d || iy < p || iy - p >= h {
                            out.fill(0.0);
                            continue;
                        }
                        let src_row = ((iz - p) * h + (iy - p)) * w;
                        out[..w_lo].fill(0.0);
                        out[w_hi..].fill(0.0);
                        let src = src_row + w_lo + kw - p;
                        out[w_lo..w_hi].copy_from_slice(&plane[src..src + (w_hi - w_lo)]);
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into the input gradient.
fn col2im(cols: &[f64], dims: &ConvDims, r0: usize, r1: usize, grad_input: &mut [f64]) {
    let ConvDims { c_in, kernel: k, padding: p, d, h, w, .. } = *dims;
    let (_, oh, ow) = dims.out_dims();
    let n = (r1 - r0) * ow;
    let mut row = 0;
    for c in 0..c_in {
        let plane = &mut grad_input[c * d * h * w..(c + 1) * d * h * w];
        for kd in 0..k {
            for kh in 0..k {
                for kw in 0..k {
                    let src = &cols[row * n..(row + 1) * n];
                    let w_lo = p.saturating_sub(kw).min(ow);
                    let w_hi = (w + p).saturating_sub(kw).min(ow).max(w_lo);
                    for r in r0..r1 {
                        let (iz, iy) = (r / oh + kd, r % oh + kh);
                        if iz < p || iz - p >= d || iy < p || iy - p >= h {
                            continue;
                        }
                        let dst_row = ((iz - p) * h + (iy - p)) * w + kw + w_lo - p;
                        let base = (r - r0) * ow;
                        let seg = &src[base + w_lo..base + w_hi];
                        for (g, &v) in plane[dst_row..dst_row + seg.len()].iter_mut().zip(seg) {
                            *g += v;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Split the output rows into tiles of roughly [`TILE_COLS`] columns.
fn tiles(dims: &ConvDims) -> impl Iterator<Item = (usize, usize)> {
    let (od, oh, ow) = dims.out_dims();
    let rows = od * oh;
    let step = (TILE_COLS / ow.max(1)).max(1);
    (0..rows).step_by(step).map(move |r0| (r0, (r0 + step).min(rows)))
}

pub(crate) fn conv3d_forward(input: &[f64], dims: &ConvDims, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let k_rows = dims.rows();
    let n = dims.cols();
    let ow = dims.out_dims().2;
    let mut out = vec![0.0; dims.c_out * n];
    for (o, chunk) in out.chunks_mut(n.max(1)).enumerate() {
        chunk.fill(bias[o]);
    }
    let mut cols = Vec::new();
    for (r0, r1) in tiles(dims) {
        let tn = (r1 - r0) * ow;
        cols.resize(k_rows * tn, 0.0);
        im2col(input, dims, r0, r1, &mut cols);
        gemm_ld(dims.c_out, k_rows, tn, weight, k_rows, false, &cols, tn, false, 1.0, &mut out[r0 * ow..], n);
    }
    out
}

/// Returns `(grad_input, grad_weight, grad_bias)`.
pub(crate) fn conv3d_backward(
    input: &[f64],
    dims: &ConvDims,
    weight: &[f64],
    grad_out: &[f64],
    need_input_grad: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k_rows = dims.rows();
    let n = dims.cols();
    let ow = dims.out_dims().2;
    let mut grad_weight = vec![0.0; dims.c_out * k_rows];
    let grad_bias: Vec<f64> = grad_out.chunks(n.max(1)).map(|c| c.iter().sum()).collect();
    let mut grad_input = vec![0.0; input.len()];
    let mut cols = Vec::new();
    let mut col_grad = Vec::new();
    for (r0, r1) in tiles(dims) {
        let tn = (r1 - r0) * ow;
        cols.resize(k_rows * tn, 0.0);
        im2col(input, dims, r0, r1, &mut cols);
        let g = &grad_out[r0 * ow..];
        gemm_ld(dims.c_out, tn, k_rows, g, n, false, &cols, tn, true, 1.0, &mut grad_weight, k_rows);
        if need_input_grad {
            col_grad.resize(k_rows * tn, 0.0);
            gemm_ld(k_rows, dims.c_out, tn, weight, k_rows, true, g, n, false, 0.0, &mut col_grad, tn);
            col2im(&col_grad, dims, r0, r1, &mut grad_input);
        }
    }
    (grad_input, grad_weight, grad_bias)
}

pub(crate) fn dense_forward(input: &[f64], rows: usize, inputs: usize, outputs: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * outputs);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    gemm(rows, inputs, outputs, input, false, weight, true, 1.0, &mut out);
    out
}

/// Returns `(grad_input, grad_weight, grad_bias)`.
pub(crate) fn dense_backward(
    input: &[f64],
    rows: usize,
    inputs: usize,
    outputs: usize,
    weight: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut grad_weight = vec![0.0; outputs * inputs];
    gemm(outputs, rows, inputs, grad_out, true, input, false, 0.0, &mut grad_weight);
    let mut grad_bias = vec![0.0; outputs];
    for row in grad_out.chunks(outputs) {
        for (g, &v) in grad_bias.iter_mut().zip(row) {
            *g += v;
        }
    }
    let mut grad_input = vec![0.0; rows * inputs];
    gemm(rows, outputs, inputs, grad_out, false, weight, false, 0.0, &mut grad_input);
    (grad_input, grad_weight, grad_bias)
}

pub(crate) fn avg_pool2_forward(input: &[f64], c: usize, d: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * d * oh * ow];
    for s in 0..c * d {
        let src = &input[s * h * w..(s + 1) * h * w];
        let dst = &mut out[s * oh * ow..(s + 1) * oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                let i = 2 * y * w + 2 * x;
                dst[y * ow + x] = 0.25 * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
            }
        }
    }
    out
}

pub(crate) fn avg_pool2_backward(grad_out: &[f64], c: usize, d: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut grad = vec![0.0; c * d * h * w];
    for s in 0..c * d {
        let src = &grad_out[s * oh * ow..(s + 1) * oh * ow];
        let dst = &mut grad[s * h * w..(s + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let g = 0.25 * src[y * ow + x];
                let i = 2 * y * w + 2 * x;
                dst[i] = g;
                dst[i + 1] = g;
                dst[i + w] = g;
                dst[i + w + 1] = g;
            }
        }
    }
    grad
}

pub(crate) fn upsample2_forward(input: &[f64], c: usize, d: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * d * oh * ow];
    for s in 0..c * d {
        let src = &input[s * h * w..(s + 1) * h * w];
        let dst = &mut out[s * oh * ow..(s + 1) * oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                dst[y * ow + x] = src[(y / 2) * w + x / 2];
            }
        }
    }
    out
}

pub(crate) fn upsample2_backward(grad_out: &[f64], c: usize, d: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut grad = vec![0.0; c * d * h * w];
    for s in 0..c * d {
        let src = &grad_out[s * oh * ow..(s + 1) * oh * ow];
        let dst = &mut grad[s * h * w..(s + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                dst[(y / 2) * w + x / 2] += src[y * ow + x];
            }
        }
    }
    grad
}
