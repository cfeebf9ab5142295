//! Layer kinds, their geometry, and the forward/backward kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel-major activation map: `values[c * length + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub length: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, length: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::Shape("feature map needs at least one channel and one sample".into()));
        }
        if values.len() != channels * length {
            return Err(Error::Shape(format!(
                "feature map {channels}x{length} needs {} values, got {}",
                channels * length,
                values.len()
            )));
        }
        Ok(Self {
            channels,
            length,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let length = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != length) {
            return Err(Error::Shape("ragged feature map rows".into()));
        }
        Self::new(rows.len(), length, rows.concat())
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.length..(c + 1) * self.length]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv1d,
    SepConv1d,
    Relu,
    MaxPool1d,
    GlobalAvgPool,
    Dense,
    Softmax,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv1d => "conv1d",
            LayerKind::SepConv1d => "sepconv1d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool1d => "maxpool1d",
            LayerKind::GlobalAvgPool => "globalavgpool",
            LayerKind::Dense => "dense",
            LayerKind::Softmax => "softmax",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "conv1d" => LayerKind::Conv1d,
            "sepconv1d" => LayerKind::SepConv1d,
            "relu" => LayerKind::Relu,
            "maxpool1d" => LayerKind::MaxPool1d,
            "globalavgpool" => LayerKind::GlobalAvgPool,
            "dense" => LayerKind::Dense,
            "softmax" => LayerKind::Softmax,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Same,
    Valid,
}

impl Padding {
    pub fn as_str(self) -> &'static str {
        match self {
            Padding::Same => "same",
            Padding::Valid => "valid",
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(default = "one")]
    pub kernel: usize,
    /// Required for conv kinds; for `Dense`, `None` means "number of classes".
    #[serde(default)]
    pub out_channels: Option<usize>,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: Padding,
}

impl LayerSpec {
    fn simple(kind: LayerKind) -> Self {
        Self {
            kind,
            kernel: 1,
            out_channels: None,
            stride: 1,
            padding: Padding::Same,
        }
    }

    pub fn conv(kernel: usize, out_channels: usize, stride: usize, padding: Padding) -> Self {
        Self {
            kind: LayerKind::Conv1d,
            kernel,
            out_channels: Some(out_channels),
            stride,
            padding,
        }
    }

    pub fn sepconv(kernel: usize, out_channels: usize, stride: usize, padding: Padding) -> Self {
        Self {
            kind: LayerKind::SepConv1d,
            ..Self::conv(kernel, out_channels, stride, padding)
        }
    }

    pub fn relu() -> Self {
        Self::simple(LayerKind::Relu)
    }

    pub fn maxpool(size: usize) -> Self {
        Self {
            kernel: size,
            stride: size,
            ..Self::simple(LayerKind::MaxPool1d)
        }
    }

    pub fn global_avg_pool() -> Self {
        Self::simple(LayerKind::GlobalAvgPool)
    }

    pub fn dense(out: Option<usize>) -> Self {
        Self {
            out_channels: out,
            ..Self::simple(LayerKind::Dense)
        }
    }

    pub fn softmax() -> Self {
        Self::simple(LayerKind::Softmax)
    }
}

/// Output length and left padding of a 1D convolution.
pub fn conv_geometry(len: usize, kernel: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    if kernel == 0 || stride == 0 {
        return Err(Error::Shape("kernel and stride must be >= 1".into()));
    }
    match padding {
        Padding::Same => {
            let out = len.div_ceil(stride);
            let needed = ((out - 1) * stride + kernel).saturating_sub(len);
            Ok((out, needed / 2))
        }
        Padding::Valid => {
            if len < kernel {
                return Err(Error::Shape(format!(
                    "valid convolution with kernel {kernel} needs length >= {kernel}, got {len}"
                )));
            }
            Ok(((len - kernel) / stride + 1, 0))
        }
    }
}

/// Range of output positions `t` for which `t*stride + j - pad` lands in `[0, len)`.
#[inline]
fn valid_range(j: usize, pad: usize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let lo = if pad > j { (pad - j).div_ceil(stride) } else { 0 };
    let hi_excl = if len + pad > j {
        ((len - 1 + pad - j) / stride + 1).min(out_len)
    } else {
        0
    };
    let lo = lo.min(out_len);
    (lo, hi_excl.max(lo))
}

/// Geometry shared by the convolution kernels.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub len: usize,
    pub out_len: usize,
}

/// out[o][t] = bias[o] + sum_{c,j} w[o][c][j] * in[c][t*stride + j - pad]
pub(crate) fn conv_forward(input: &[f64], weights: &[f64], bias: &[f64], d: ConvDims, out: &mut [f64]) {
    for o in 0..d.cout {
        let row = &mut out[o * d.out_len..(o + 1) * d.out_len];
        row.fill(bias[o]);
        for c in 0..d.cin {
            let x = &input[c * d.len..(c + 1) * d.len];
            let w = &weights[(o * d.cin + c) * d.kernel..(o * d.cin + c + 1) * d.kernel];
            for (j, &wj) in w.iter().enumerate() {
                let (lo, hi) = valid_range(j, d.pad, d.stride, d.len, d.out_len);
                if lo == hi {
                    continue;
                }
                if d.stride == 1 {
                    let start = lo + j - d.pad;
                    for (r, xv) in row[lo..hi].iter_mut().zip(&x[start..start + hi - lo]) {
                        *r += wj * xv;
                    }
                } else {
                    for t in lo..hi {
                        row[t] += wj * x[t * d.stride + j - d.pad];
                    }
                }
            }
        }
    }
}

/// Accumulates weight, bias and input gradients of `conv_forward`.
pub(crate) fn conv_backward(
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    d: ConvDims,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    grad_in: Option<&mut [f64]>,
) {
    for o in 0..d.cout {
        let g = &grad_out[o * d.out_len..(o + 1) * d.out_len];
        grad_b[o] += g.iter().sum::<f64>();
        for c in 0..d.cin {
            let x = &input[c * d.len..(c + 1) * d.len];
            let base = (o * d.cin + c) * d.kernel;
            for j in 0..d.kernel {
                let (lo, hi) = valid_range(j, d.pad, d.stride, d.len, d.out_len);
                if lo == hi {
                    continue;
                }
                let mut acc = 0.0;
                if d.stride == 1 {
                    let start = lo + j - d.pad;
                    for (gv, xv) in g[lo..hi].iter().zip(&x[start..start + hi - lo]) {
                        acc += gv * xv;
                    }
                } else {
                    for t in lo..hi {
                        acc += g[t] * x[t * d.stride + j - d.pad];
                    }
                }
                grad_w[base + j] += acc;
            }
        }
    }
    if let Some(grad_in) = grad_in {
        for o in 0..d.cout {
            let g = &grad_out[o * d.out_len..(o + 1) * d.out_len];
            for c in 0..d.cin {
                let gi = &mut grad_in[c * d.len..(c + 1) * d.len];
                let base = (o * d.cin + c) * d.kernel;
                for j in 0..d.kernel {
                    let wj = weights[base + j];
                    let (lo, hi) = valid_range(j, d.pad, d.stride, d.len, d.out_len);
                    if lo == hi {
                        continue;
                    }
                    if d.stride == 1 {
                        let start = lo + j - d.pad;
                        for (giv, gv) in gi[start..start + hi - lo].iter_mut().zip(&g[lo..hi]) {
                            *giv += wj * gv;
                        }
                    } else {
                        for t in lo..hi {
                            gi[t * d.stride + j - d.pad] += wj * g[t];
                        }
                    }
                }
            }
        }
    }
}

/// Per-channel convolution: out[c][t] = bias[c] + sum_j w[c][j] * in[c][t*stride + j - pad].
pub(crate) fn depthwise_forward(input: &[f64], weights: &[f64], bias: &[f64], d: ConvDims, out: &mut [f64]) {
    for c in 0..d.cin {
        let row = &mut out[c * d.out_len..(c + 1) * d.out_len];
        let single = ConvDims { cin: 1, cout: 1, ..d };
        conv_forward(
            &input[c * d.len..(c + 1) * d.len],
            &weights[c * d.kernel..(c + 1) * d.kernel],
            &bias[c..c + 1],
            single,
            row,
        );
    }
}

pub(crate) fn depthwise_backward(
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    d: ConvDims,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    let single = ConvDims { cin: 1, cout: 1, ..d };
    for c in 0..d.cin {
        conv_backward(
            &input[c * d.len..(c + 1) * d.len],
            &weights[c * d.kernel..(c + 1) * d.kernel],
            &grad_out[c * d.out_len..(c + 1) * d.out_len],
            single,
            &mut grad_w[c * d.kernel..(c + 1) * d.kernel],
            &mut grad_b[c..c + 1],
            grad_in.as_deref_mut().map(|g| &mut g[c * d.len..(c + 1) * d.len]),
        );
    }
}

fn check_conv_shapes(input: &FeatureMap, weights_len: usize, expected: usize, bias_len: usize, cout: usize) -> Result<()> {
    if weights_len != expected {
        return Err(Error::Shape(format!("expected {expected} weights, got {weights_len}")));
    }
    if bias_len != cout {
        return Err(Error::Shape(format!("expected {cout} biases, got {bias_len}")));
    }
    if input.values.len() != input.channels * input.length {
        return Err(Error::Shape("feature map size does not match its dimensions".into()));
    }
    Ok(())
}

/// Standard 1D convolution. `weights` is `out_channels x in_channels x kernel`.
pub fn conv1d_forward(
    input: &FeatureMap,
    weights: &[f64],
    bias: &[f64],
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<FeatureMap> {
    let cout = bias.len();
    check_conv_shapes(input, weights.len(), cout * input.channels * kernel, bias.len(), cout)?;
    let (out_len, pad) = conv_geometry(input.length, kernel, stride, padding)?;
    let d = ConvDims {
        cin: input.channels,
        cout,
        kernel,
        stride,
        pad,
        len: input.length,
        out_len,
    };
    let mut out = vec![0.0; cout * out_len];
    conv_forward(&input.values, weights, bias, d, &mut out);
    FeatureMap::new(cout, out_len, out)
}

/// Depthwise-separable 1D convolution: a per-channel `kernel`-tap filter
/// (`depthwise`, `in_channels x kernel`, carrying stride and padding)
/// followed by a 1x1 channel mix (`pointwise`, `out_channels x in_channels`).
#[allow(clippy::too_many_arguments)]
pub fn sepconv1d_forward(
    input: &FeatureMap,
    depthwise: &[f64],
    depthwise_bias: &[f64],
    pointwise: &[f64],
    pointwise_bias: &[f64],
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<FeatureMap> {
    let cin = input.channels;
    let cout = pointwise_bias.len();
    check_conv_shapes(input, depthwise.len(), cin * kernel, depthwise_bias.len(), cin)?;
    if pointwise.len() != cout * cin {
        return Err(Error::Shape(format!(
            "expected {} pointwise weights, got {}",
            cout * cin,
            pointwise.len()
        )));
    }
    let (out_len, pad) = conv_geometry(input.length, kernel, stride, padding)?;
    let d = ConvDims {
        cin,
        cout: cin,
        kernel,
        stride,
        pad,
        len: input.length,
        out_len,
    };
    let mut mid = vec![0.0; cin * out_len];
    depthwise_forward(&input.values, depthwise, depthwise_bias, d, &mut mid);
    let pw = pointwise_dims(cin, cout, out_len);
    let mut out = vec![0.0; cout * out_len];
    conv_forward(&mid, pointwise, pointwise_bias, pw, &mut out);
    FeatureMap::new(cout, out_len, out)
}

pub(crate) fn pointwise_dims(cin: usize, cout: usize, len: usize) -> ConvDims {
    ConvDims {
        cin,
        cout,
        kernel: 1,
        stride: 1,
        pad: 0,
        len,
        out_len: len,
    }
}

/// Weights plus biases of a standard convolution.
pub fn conv1d_param_count(in_channels: usize, out_channels: usize, kernel: usize) -> usize {
    kernel * in_channels * out_channels + out_channels
}

/// Depthwise weights and biases plus pointwise weights and biases.
pub fn sepconv1d_param_count(in_channels: usize, out_channels: usize, kernel: usize) -> usize {
    kernel * in_channels + in_channels + in_channels * out_channels + out_channels
}

/// Max pooling with window == stride == `size`; output length `len / size`.
/// Returns the pooled values and, per output, the index of the first maximum.
pub(crate) fn maxpool_forward(input: &[f64], channels: usize, len: usize, size: usize) -> (Vec<f64>, Vec<usize>) {
    let out_len = len / size;
    let mut out = Vec::with_capacity(channels * out_len);
    let mut arg = Vec::with_capacity(channels * out_len);
    for c in 0..channels {
        let x = &input[c * len..(c + 1) * len];
        for t in 0..out_len {
            let start = t * size;
            let mut best = start;
            for i in start + 1..start + size {
                if x[i] > x[best] {
                    best = i;
                }
            }
            out.push(x[best]);
            arg.push(c * len + best);
        }
    }
    (out, arg)
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let x = FeatureMap::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let y = conv1d_forward(&x, &[1.0], &[0.0], 1, 1, Padding::Same).unwrap();
        assert_eq!(y.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn box_filter_valid() {
        let x = FeatureMap::from_rows(&[vec![1.0; 4]]).unwrap();
        let y = conv1d_forward(&x, &[1.0, 1.0], &[0.0], 2, 1, Padding::Valid).unwrap();
        assert_eq!(y.values, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn shape_mismatch() {
        let x = FeatureMap::from_rows(&[vec![1.0; 4]]).unwrap();
        assert!(conv1d_forward(&x, &[1.0, 1.0, 1.0], &[0.0], 2, 1, Padding::Valid).is_err());
        assert!(conv1d_forward(&x, &[1.0; 5], &[0.0], 5, 1, Padding::Valid).is_err());
        assert!(sepconv1d_forward(&x, &[1.0], &[0.0], &[1.0, 1.0], &[0.0], 1, 1, Padding::Same).is_err());
        assert!(FeatureMap::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn sepconv_identity_factorization() {
        let x = FeatureMap::from_rows(&[vec![1.0, -2.0, 3.0, 0.5], vec![4.0, 5.0, -6.0, 7.0]]).unwrap();
        // unit impulse at the centre tap of a k=3 SAME filter
        let depthwise = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let pointwise = [1.0, 0.0, 0.0, 1.0];
        let y = sepconv1d_forward(&x, &depthwise, &[0.0; 2], &pointwise, &[0.0; 2], 3, 1, Padding::Same).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn paper_scale_param_counts() {
        assert_eq!(conv1d_param_count(32, 64, 16), 32832);
        assert_eq!(sepconv1d_param_count(32, 64, 16), 2656);
    }

    #[test]
    fn maxpool_first_max_wins() {
        let (out, arg) = maxpool_forward(&[1.0, 3.0, 3.0, 0.0, 2.0], 1, 5, 2);
        assert_eq!(out, vec![3.0, 3.0]);
        assert_eq!(arg, vec![1, 2]);
    }

    #[test]
    fn same_geometry() {
        assert_eq!(conv_geometry(10, 3, 1, Padding::Same).unwrap(), (10, 1));
        assert_eq!(conv_geometry(10, 4, 3, Padding::Same).unwrap(), (4, 1));
        assert_eq!(conv_geometry(10, 4, 3, Padding::Valid).unwrap(), (3, 0));
    }
}
