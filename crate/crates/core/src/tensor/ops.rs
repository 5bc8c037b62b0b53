use crate::error::{Error, Result};
use crate::rng::Rng;

use super::Tensor;

/// Probability clamp applied before taking logs in the cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

/// Zero rows added above and below the input so a width-`h` window yields one
/// output per input row. Even widths put the extra row below.
pub fn same_padding(kernel_size: usize) -> (usize, usize) {
    let total = kernel_size.saturating_sub(1);
    (total / 2, total - total / 2)
}

/// `out[n_windows × fo] = bias + windows · kernelsᵀ`, where window `i` is the
/// contiguous slice `padded[(start_row + i) * d .. (start_row + i + h) * d]` and
/// `kernels` is row-major `[fo × h·d]`. Windows overlap in memory; the GEMM only
/// reads them.
pub(crate) fn gemm_windows(
    padded: &[f64],
    n_windows: usize,
    d: usize,
    h: usize,
    start_row: usize,
    kernels: &[f64],
    fo: usize,
    bias: &[f64],
    out: &mut [f64],
) {
    let hd = h * d;
    assert!(padded.len() >= (start_row + n_windows - 1 + h) * d);
    assert_eq!(kernels.len(), fo * hd);
    assert_eq!(bias.len(), fo);
    assert_eq!(out.len(), n_windows * fo);
    for row in out.chunks_exact_mut(fo) {
        row.copy_from_slice(bias);
    }
    // SAFETY: the asserts above bound every index the GEMM touches; `out` does
    // not alias either input.
    unsafe {
        matrixmultiply::dgemm(
            n_windows,
            hd,
            fo,
            1.0,
            padded.as_ptr().add(start_row * d),
            d as isize,
            1,
            kernels.as_ptr(),
            1,
            hd as isize,
            1.0,
            out.as_mut_ptr(),
            fo as isize,
            1,
        );
    }
}

/// `grad_kernels[fo × h·d] += upstreamᵀ · windows` with the same window layout
/// as [`gemm_windows`].
pub(crate) fn gemm_windows_transposed_acc(
    padded: &[f64],
    n_windows: usize,
    d: usize,
    h: usize,
    start_row: usize,
    upstream: &[f64],
    fo: usize,
    grad_kernels: &mut [f64],
) {
    let hd = h * d;
    assert!(padded.len() >= (start_row + n_windows - 1 + h) * d);
    assert_eq!(upstream.len(), n_windows * fo);
    assert_eq!(grad_kernels.len(), fo * hd);
    // SAFETY: bounds checked above, output does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            fo,
            n_windows,
            hd,
            1.0,
            upstream.as_ptr(),
            1,
            fo as isize,
            padded.as_ptr().add(start_row * d),
            d as isize,
            1,
            1.0,
            grad_kernels.as_mut_ptr(),
            hd as isize,
            1,
        );
    }
}

struct ConvDims {
    n: usize,
    d: usize,
    f: usize,
    h: usize,
}

fn conv_dims(input: &Tensor, kernels: &Tensor) -> Result<ConvDims> {
    input.expect_rank(2, "conv input")?;
    kernels.expect_rank(3, "conv kernels")?;
    let (n, d) = (input.shape()[0], input.shape()[1]);
    let (f, h, kd) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[2]);
    if kd != d {
        return Err(Error::shape(format!(
            "conv embedding width mismatch: input has d={d}, kernels have d={kd}"
        )));
    }
    Ok(ConvDims { n, d, f, h })
}

fn pad_rows(input: &Tensor, h: usize) -> Vec<f64> {
    let (before, after) = same_padding(h);
    let d = input.shape()[1];
    let mut padded = vec![0.0; (input.shape()[0] + before + after) * d];
    padded[before * d..before * d + input.len()].copy_from_slice(input.data());
    padded
}

/// One-dimensional convolution over the time axis with same-length output.
///
/// `input` is `[N × d]`, `kernels` is `[F × h × d]`, `bias` is `[F]`; the result
/// is `[N × F]` with
/// `out[i][k] = Σ_{j<h, c<d} padded[i + j][c] · kernels[k][j][c] + bias[k]`.
pub fn conv1d_same(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let ConvDims { n, d, f, h } = conv_dims(input, kernels)?;
    if bias.shape() != [f] {
        return Err(Error::shape(format!(
            "conv bias must be [{f}], got {:?}",
            bias.shape()
        )));
    }
    let padded = pad_rows(input, h);
    let mut out = vec![0.0; n * f];
    gemm_windows(&padded, n, d, h, 0, kernels.data(), f, bias.data(), &mut out);
    Tensor::new(vec![n, f], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

pub fn conv1d_same_backward(input: &Tensor, kernels: &Tensor, upstream: &Tensor) -> Result<ConvGrads> {
    let ConvDims { n, d, f, h } = conv_dims(input, kernels)?;
    if upstream.shape() != [n, f] {
        return Err(Error::shape(format!(
            "conv upstream must be [{n}, {f}], got {:?}",
            upstream.shape()
        )));
    }
    let hd = h * d;
    let padded = pad_rows(input, h);

    let mut grad_bias = vec![0.0; f];
    for row in upstream.data().chunks_exact(f) {
        for (g, u) in grad_bias.iter_mut().zip(row) {
            *g += u;
        }
    }

    let mut grad_kernels = vec![0.0; f * hd];
    gemm_windows_transposed_acc(&padded, n, d, h, 0, upstream.data(), f, &mut grad_kernels);

    let mut grad_windows = vec![0.0; n * hd];
    // SAFETY: upstream is n×f, kernels f×hd, grad_windows n×hd, all sized above.
    unsafe {
        matrixmultiply::dgemm(
            n,
            f,
            hd,
            1.0,
            upstream.data().as_ptr(),
            f as isize,
            1,
            kernels.data().as_ptr(),
            hd as isize,
            1,
            0.0,
            grad_windows.as_mut_ptr(),
            hd as isize,
            1,
        );
    }
    let mut grad_padded = vec![0.0; padded.len()];
    for (i, window) in grad_windows.chunks_exact(hd).enumerate() {
        for (g, w) in grad_padded[i * d..i * d + hd].iter_mut().zip(window) {
            *g += w;
        }
    }
    let (before, _) = same_padding(h);
    let grad_input = grad_padded[before * d..(before + n) * d].to_vec();

    Ok(ConvGrads {
        input: Tensor::new(vec![n, d], grad_input)?,
        kernels: Tensor::new(vec![f, h, d], grad_kernels)?,
        bias: Tensor::new(vec![f], grad_bias)?,
    })
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pointwise nonlinearities used by the convolution branches and output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative evaluated at the pre-activation `x`. Relu uses 0 at `x == 0`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn activation(kind: Activation, x: &Tensor) -> Tensor {
    x.map(|v| kind.apply(v))
}

/// Upstream gradient times the activation derivative at `pre`.
pub fn activation_backward(kind: Activation, pre: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    pre.expect_same_shape(upstream)?;
    let data = pre
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &u)| u * kind.derivative(x))
        .collect();
    Tensor::new(pre.shape().to_vec(), data)
}

pub fn elementwise_mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.expect_same_shape(b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Returns `(grad_a, grad_b) = (upstream ⊙ b, upstream ⊙ a)`.
pub fn elementwise_mul_backward(a: &Tensor, b: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor)> {
    a.expect_same_shape(b)?;
    a.expect_same_shape(upstream)?;
    Ok((elementwise_mul(upstream, b)?, elementwise_mul(upstream, a)?))
}

/// Max over the time axis of an `[N × F]` map. Ties go to the earliest row.
pub fn maxpool_time(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    input.expect_rank(2, "maxpool input")?;
    let (n, f) = (input.shape()[0], input.shape()[1]);
    if n == 0 {
        return Err(Error::invalid("maxpool over an empty time axis"));
    }
    let data = input.data();
    let mut values = data[..f].to_vec();
    let mut argmax = vec![0usize; f];
    for i in 1..n {
        let row = &data[i * f..(i + 1) * f];
        for k in 0..f {
            if row[k] > values[k] {
                values[k] = row[k];
                argmax[k] = i;
            }
        }
    }
    Ok((Tensor::new(vec![f], values)?, argmax))
}

/// Routes `upstream[k]` to row `argmax[k]` of an `[n × F]` gradient.
pub fn maxpool_time_backward(argmax: &[usize], n: usize, upstream: &Tensor) -> Result<Tensor> {
    let f = argmax.len();
    if upstream.shape() != [f] {
        return Err(Error::shape(format!(
            "maxpool upstream must be [{f}], got {:?}",
            upstream.shape()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("maxpool over an empty time axis"));
    }
    let mut grad = Tensor::zeros(&[n, f]);
    for (k, (&row, &u)) in argmax.iter().zip(upstream.data()).enumerate() {
        if row >= n {
            return Err(Error::shape(format!("argmax row {row} out of range for n={n}")));
        }
        grad.data_mut()[row * f + k] = u;
    }
    Ok(grad)
}

fn dense_dims(x: &Tensor, w: &Tensor) -> Result<(usize, usize, usize)> {
    w.expect_rank(2, "dense weights")?;
    let (m, n) = (w.shape()[0], w.shape()[1]);
    let batch = match x.shape() {
        [len] if *len == m => 1,
        [b, len] if *len == m => *b,
        other => {
            return Err(Error::shape(format!(
                "dense input {other:?} incompatible with weights [{m}, {n}]"
            )))
        }
    };
    Ok((batch, m, n))
}

/// Fully connected layer `y = xᵀW + b` for `x` of shape `[m]` or `[B × m]`.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (batch, m, n) = dense_dims(x, w)?;
    if b.shape() != [n] {
        return Err(Error::shape(format!("dense bias must be [{n}], got {:?}", b.shape())));
    }
    let mut out = Vec::with_capacity(batch * n);
    for _ in 0..batch {
        out.extend_from_slice(b.data());
    }
    // SAFETY: x is batch×m, w is m×n, out is batch×n.
    unsafe {
        matrixmultiply::dgemm(
            batch,
            m,
            n,
            1.0,
            x.data().as_ptr(),
            m as isize,
            1,
            w.data().as_ptr(),
            n as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    let shape = if x.rank() == 1 { vec![n] } else { vec![batch, n] };
    Tensor::new(shape, out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub x: Tensor,
    pub w: Tensor,
    pub b: Tensor,
}

pub fn dense_backward(x: &Tensor, w: &Tensor, upstream: &Tensor) -> Result<DenseGrads> {
    let (batch, m, n) = dense_dims(x, w)?;
    if upstream.len() != batch * n || upstream.rank() != x.rank() {
        return Err(Error::shape(format!(
            "dense upstream {:?} does not match output of input {:?}",
            upstream.shape(),
            x.shape()
        )));
    }
    let up = upstream.data();
    let mut gx = vec![0.0; batch * m];
    let mut gw = vec![0.0; m * n];
    let mut gb = vec![0.0; n];
    for row in up.chunks_exact(n) {
        for (g, u) in gb.iter_mut().zip(row) {
            *g += u;
        }
    }
    // SAFETY: all buffers sized from (batch, m, n) above.
    unsafe {
        // gx = up · Wᵀ
        matrixmultiply::dgemm(
            batch,
            n,
            m,
            1.0,
            up.as_ptr(),
            n as isize,
            1,
            w.data().as_ptr(),
            1,
            n as isize,
            0.0,
            gx.as_mut_ptr(),
            m as isize,
            1,
        );
        // gw = xᵀ · up
        matrixmultiply::dgemm(
            m,
            batch,
            n,
            1.0,
            x.data().as_ptr(),
            1,
            m as isize,
            up.as_ptr(),
            n as isize,
            1,
            0.0,
            gw.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(DenseGrads {
        x: Tensor::new(x.shape().to_vec(), gx)?,
        w: Tensor::new(vec![m, n], gw)?,
        b: Tensor::new(vec![n], gb)?,
    })
}

/// Which elements survived an inverted-dropout pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep_prob: f64,
    kept: Vec<bool>,
}

impl DropoutMask {
    pub fn all_kept(len: usize) -> Self {
        Self {
            keep_prob: 1.0,
            kept: vec![true; len],
        }
    }

    pub(crate) fn sample(len: usize, keep_prob: f64, rng: &mut Rng) -> Self {
        if keep_prob >= 1.0 {
            return Self::all_kept(len);
        }
        Self {
            keep_prob,
            kept: (0..len).map(|_| rng.bernoulli(keep_prob)).collect(),
        }
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Multiplier for element `i`: `1/keep_prob` if kept, else 0.
    #[inline]
    pub fn factor(&self, i: usize) -> f64 {
        if self.kept[i] {
            1.0 / self.keep_prob
        } else {
            0.0
        }
    }

    pub(crate) fn apply_in_place(&self, values: &mut [f64]) {
        debug_assert_eq!(values.len(), self.kept.len());
        if self.keep_prob >= 1.0 {
            return;
        }
        let scale = 1.0 / self.keep_prob;
        for (v, &k) in values.iter_mut().zip(&self.kept) {
            *v = if k { *v * scale } else { 0.0 };
        }
    }
}

pub(crate) fn check_keep_prob(keep_prob: f64) -> Result<()> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::invalid(format!(
            "keep probability must be in (0, 1], got {keep_prob}"
        )));
    }
    Ok(())
}

/// Inverted dropout: kept elements are scaled by `1/keep_prob` during training;
/// inference is the identity and draws nothing from `rng`.
pub fn dropout(x: &Tensor, keep_prob: f64, rng: &mut Rng, training: bool) -> Result<(Tensor, DropoutMask)> {
    check_keep_prob(keep_prob)?;
    let mask = if training {
        DropoutMask::sample(x.len(), keep_prob, rng)
    } else {
        DropoutMask::all_kept(x.len())
    };
    let mut y = x.clone();
    mask.apply_in_place(y.data_mut());
    Ok((y, mask))
}

pub fn dropout_backward(mask: &DropoutMask, upstream: &Tensor) -> Result<Tensor> {
    if mask.len() != upstream.len() {
        return Err(Error::shape(format!(
            "dropout mask has {} elements, upstream has {}",
            mask.len(),
            upstream.len()
        )));
    }
    let mut grad = upstream.clone();
    mask.apply_in_place(grad.data_mut());
    Ok(grad)
}

/// Binary cross-entropy of one prediction and its derivative with respect to
/// `p`. `p` is clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` first.
pub fn bce_loss(p: f64, y: f64) -> Result<(f64, f64)> {
    if y != 0.0 && y != 1.0 {
        return Err(Error::invalid(format!("label must be 0 or 1, got {y}")));
    }
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = -y / p + (1.0 - y) / (1.0 - p);
    Ok((loss, grad))
}

pub fn mean_bce_loss(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::invalid("loss over an empty batch"));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        total += bce_loss(p, y)?.0;
    }
    Ok(total / probs.len() as f64)
}
