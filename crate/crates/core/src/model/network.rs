use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{gemm_windows, sigmoid, DropoutMask};
use crate::text::EncodedExample;

use super::{GateKind, GcnGrads, GcnParams};

/// Main and gate kernels of one width stacked into a single `[kF × h·d]`
/// matrix so both convolutions come out of one GEMM.
struct FusedBranch {
    h: usize,
    start_row: usize,
    width: usize,
    kernels: Vec<f64>,
    bias: Vec<f64>,
}

fn fuse(params: &GcnParams) -> Vec<FusedBranch> {
    let (before, _) = params.config.pad_extent();
    params
        .branches
        .iter()
        .map(|b| {
            let mut kernels = b.main_kernels.data().to_vec();
            let mut bias = b.main_bias.data().to_vec();
            if let (Some(k), Some(bb)) = (&b.gate_kernels, &b.gate_bias) {
                kernels.extend_from_slice(k.data());
                bias.extend_from_slice(bb.data());
            }
            let (own_before, _) = crate::tensor::same_padding(b.kernel_size);
            FusedBranch {
                h: b.kernel_size,
                start_row: before - own_before,
                width: bias.len(),
                kernels,
                bias,
            }
        })
        .collect()
}

/// Pre-activations at the rows chosen by max pooling.
#[derive(Debug, Clone)]
struct PooledBranch {
    argmax: Vec<usize>,
    main_pre: Vec<f64>,
    gate_pre: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ExampleCache {
    indices: Vec<u32>,
    padded: Vec<f64>,
    embed_mask: Option<DropoutMask>,
    branches: Vec<PooledBranch>,
}

/// Everything a training-mode [`forward`] keeps for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    examples: Vec<ExampleCache>,
    features: Vec<f64>,
    dense_mask: DropoutMask,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn batch_len(&self) -> usize {
        self.examples.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn check_example(params: &GcnParams, indices: &[u32]) -> Result<()> {
    let n = params.config.max_len;
    if indices.len() != n {
        return Err(Error::shape(format!(
            "example has {} positions, model expects {n}",
            indices.len()
        )));
    }
    let rows = params.embedding.rows();
    if let Some(&bad) = indices.iter().find(|&&i| i as usize >= rows) {
        return Err(Error::invalid(format!(
            "token index {bad} outside embedding table of {rows} rows"
        )));
    }
    Ok(())
}

/// Embedded, optionally dropped-out input with zero rows above and below.
fn embed(params: &GcnParams, indices: &[u32], mask: Option<&DropoutMask>) -> Vec<f64> {
    let d = params.config.embed_dim;
    let (before, after) = params.config.pad_extent();
    let mut padded = vec![0.0; (indices.len() + before + after) * d];
    for (t, &idx) in indices.iter().enumerate() {
        if idx == 0 {
            continue;
        }
        let dst = &mut padded[(before + t) * d..(before + t + 1) * d];
        dst.copy_from_slice(params.embedding.row(idx as usize));
        if let Some(mask) = mask {
            for (c, v) in dst.iter_mut().enumerate() {
                *v *= mask.factor(t * d + c);
            }
        }
    }
    padded
}

#[inline]
fn gated_value(gate: GateKind, main: f64, gate_pre: f64) -> f64 {
    match gate.gate_activation() {
        Some(g) => gate.main_activation().apply(main) * g.apply(gate_pre),
        None => gate.main_activation().apply(main),
    }
}

/// Runs every branch on one embedded example, writing pooled features into
/// `features` (length branches·F).
fn run_branches(
    params: &GcnParams,
    fused: &[FusedBranch],
    padded: &[f64],
    features: &mut [f64],
    scratch: &mut Vec<f64>,
    mut cache: Option<&mut Vec<PooledBranch>>,
) {
    let n = params.config.max_len;
    let d = params.config.embed_dim;
    let f = params.config.filters;
    let gate = params.config.gate;
    for (bi, fb) in fused.iter().enumerate() {
        scratch.resize(n * fb.width, 0.0);
        gemm_windows(padded, n, d, fb.h, fb.start_row, &fb.kernels, fb.width, &fb.bias, scratch);
        let out = &mut features[bi * f..(bi + 1) * f];
        let mut argmax = vec![0usize; f];
        for k in 0..f {
            let mut best = f64::NEG_INFINITY;
            for i in 0..n {
                let row = &scratch[i * fb.width..(i + 1) * fb.width];
                let gate_pre = if gate.is_gated() { row[f + k] } else { 0.0 };
                let v = gated_value(gate, row[k], gate_pre);
                if v > best {
                    best = v;
                    argmax[k] = i;
                }
            }
            out[k] = best;
        }
        if let Some(cache) = cache.as_deref_mut() {
            let main_pre = (0..f).map(|k| scratch[argmax[k] * fb.width + k]).collect();
            let gate_pre = if gate.is_gated() {
                (0..f).map(|k| scratch[argmax[k] * fb.width + f + k]).collect()
            } else {
                Vec::new()
            };
            cache.push(PooledBranch {
                argmax,
                main_pre,
                gate_pre,
            });
        }
    }
}

fn output_logits(params: &GcnParams, features: &[f64], batch: usize) -> Vec<f64> {
    let fl = params.config.feature_len();
    let w = params.dense_w.data();
    let b = params.dense_b.data()[0];
    (0..batch)
        .map(|e| {
            features[e * fl..(e + 1) * fl]
                .iter()
                .zip(w)
                .fold(b, |acc, (x, w)| acc + x * w)
        })
        .collect()
}

/// Batch forward pass. In training mode both dropout layers draw from `rng`
/// and the returned cache feeds [`backward`]; in inference mode `rng` is not
/// touched.
pub fn forward<E: Borrow<EncodedExample>>(
    params: &GcnParams,
    batch: &[E],
    training: bool,
    rng: &mut Rng,
) -> Result<(Vec<f64>, ForwardCache)> {
    if batch.is_empty() {
        return Err(Error::invalid("forward on an empty batch"));
    }
    let cfg = &params.config;
    let (n, d, fl) = (cfg.max_len, cfg.embed_dim, cfg.feature_len());
    let fused = fuse(params);
    let mut scratch = Vec::new();
    let mut features = vec![0.0; batch.len() * fl];
    let mut examples = Vec::with_capacity(batch.len());

    for (e, ex) in batch.iter().enumerate() {
        let indices = &ex.borrow().indices;
        check_example(params, indices)?;
        let embed_mask = training.then(|| DropoutMask::sample(n * d, 1.0 - cfg.dropout_embed, rng));
        let padded = embed(params, indices, embed_mask.as_ref());
        let mut pooled = Vec::with_capacity(fused.len());
        run_branches(
            params,
            &fused,
            &padded,
            &mut features[e * fl..(e + 1) * fl],
            &mut scratch,
            Some(&mut pooled),
        );
        examples.push(ExampleCache {
            indices: indices.clone(),
            padded,
            embed_mask: if params.embedding.trainable { embed_mask } else { None },
            branches: pooled,
        });
    }

    let dense_mask = if training {
        DropoutMask::sample(features.len(), 1.0 - cfg.dropout_dense, rng)
    } else {
        DropoutMask::all_kept(features.len())
    };
    dense_mask.apply_in_place(&mut features);
    let probs: Vec<f64> = output_logits(params, &features, batch.len())
        .into_iter()
        .map(sigmoid)
        .collect();
    let cache = ForwardCache {
        examples,
        features,
        dense_mask,
        probs: probs.clone(),
    };
    Ok((probs, cache))
}

/// Inference-mode pre-sigmoid outputs.
pub fn logits<E: Borrow<EncodedExample>>(params: &GcnParams, batch: &[E]) -> Result<Vec<f64>> {
    let fl = params.config.feature_len();
    let fused = fuse(params);
    let mut scratch = Vec::new();
    let mut features = vec![0.0; batch.len() * fl];
    for (e, ex) in batch.iter().enumerate() {
        let indices = &ex.borrow().indices;
        check_example(params, indices)?;
        let padded = embed(params, indices, None);
        run_branches(
            params,
            &fused,
            &padded,
            &mut features[e * fl..(e + 1) * fl],
            &mut scratch,
            None,
        );
    }
    Ok(output_logits(params, &features, batch.len()))
}

pub fn predict_proba<E: Borrow<EncodedExample>>(params: &GcnParams, batch: &[E]) -> Result<Vec<f64>> {
    Ok(logits(params, batch)?.into_iter().map(sigmoid).collect())
}

/// Label 1 iff the logit is ≥ 0, i.e. probability ≥ 0.5.
pub fn predict<E: Borrow<EncodedExample>>(params: &GcnParams, batch: &[E]) -> Result<Vec<u8>> {
    Ok(logits(params, batch)?
        .into_iter()
        .map(|z| u8::from(z >= 0.0))
        .collect())
}

/// Gradient of the batch-mean cross-entropy with respect to every trainable
/// tensor, reusing the dropout masks recorded in `cache`.
///
/// Max pooling passes gradient only through one row per filter, so kernel
/// gradients are accumulated from those rows' input windows alone. Row 0 of a
/// trainable embedding table never receives gradient.
pub fn backward(params: &GcnParams, cache: &ForwardCache, labels: &[u8]) -> Result<GcnGrads> {
    let batch = cache.examples.len();
    if labels.len() != batch {
        return Err(Error::invalid(format!(
            "{} labels for a cached batch of {batch}",
            labels.len()
        )));
    }
    if cache.features.len() != batch * params.config.feature_len() {
        return Err(Error::invalid("cache was produced by a different model"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("label must be 0 or 1, got {bad}")));
    }
    let cfg = &params.config;
    let (n, d, f, fl) = (cfg.max_len, cfg.embed_dim, cfg.filters, cfg.feature_len());
    let gate = cfg.gate;
    let main_act = gate.main_activation();
    let gate_act = gate.gate_activation();
    let fused = fuse(params);
    let (pad_before, _) = cfg.pad_extent();
    let mut grads = GcnGrads::zeros_like(params);

    let w = params.dense_w.data();
    let mut dfeat = vec![0.0; fl];
    let mut dpadded = Vec::new();

    for (e, ex) in cache.examples.iter().enumerate() {
        // dL/dz for a sigmoid output under mean cross-entropy.
        let dlogit = (cache.probs[e] - f64::from(labels[e])) / batch as f64;
        let feats = &cache.features[e * fl..(e + 1) * fl];
        for (gw, x) in grads.dense_w.data_mut().iter_mut().zip(feats) {
            *gw += dlogit * x;
        }
        grads.dense_b.data_mut()[0] += dlogit;
        for j in 0..fl {
            dfeat[j] = dlogit * w[j] * cache.dense_mask.factor(e * fl + j);
        }

        let want_input_grad = grads.embedding.is_some();
        if want_input_grad {
            dpadded.clear();
            dpadded.resize(ex.padded.len(), 0.0);
        }

        for (bi, (pooled, fb)) in ex.branches.iter().zip(&fused).enumerate() {
            let hd = fb.h * d;
            let bg = &mut grads.branches[bi];
            for k in 0..f {
                let up = dfeat[bi * f + k];
                if up == 0.0 {
                    continue;
                }
                let m = pooled.main_pre[k];
                let (dm, ds) = match gate_act {
                    Some(g) => {
                        let s = pooled.gate_pre[k];
                        (
                            up * g.apply(s) * main_act.derivative(m),
                            up * main_act.apply(m) * g.derivative(s),
                        )
                    }
                    None => (up * main_act.derivative(m), 0.0),
                };
                let row = fb.start_row + pooled.argmax[k];
                let window = &ex.padded[row * d..row * d + hd];
                if dm != 0.0 {
                    bg.main_bias.data_mut()[k] += dm;
                    let gk = &mut bg.main_kernels.data_mut()[k * hd..(k + 1) * hd];
                    for (g, x) in gk.iter_mut().zip(window) {
                        *g += dm * x;
                    }
                }
                if ds != 0.0 {
                    bg.gate_bias.as_mut().expect("gated branch").data_mut()[k] += ds;
                    let gk = &mut bg.gate_kernels.as_mut().expect("gated branch").data_mut()[k * hd..(k + 1) * hd];
                    for (g, x) in gk.iter_mut().zip(window) {
                        *g += ds * x;
                    }
                }
                if want_input_grad {
                    let dst = &mut dpadded[row * d..row * d + hd];
                    let mk = &fb.kernels[k * hd..(k + 1) * hd];
                    for (g, kv) in dst.iter_mut().zip(mk) {
                        *g += dm * kv;
                    }
                    if gate_act.is_some() {
                        let gk = &fb.kernels[(f + k) * hd..(f + k + 1) * hd];
                        for (g, kv) in dst.iter_mut().zip(gk) {
                            *g += ds * kv;
                        }
                    }
                }
            }
        }

        if let Some(gemb) = grads.embedding.as_mut() {
            let mask = ex.embed_mask.as_ref();
            for (t, &idx) in ex.indices.iter().enumerate().take(n) {
                if idx == 0 {
                    continue;
                }
                let src = &dpadded[(pad_before + t) * d..(pad_before + t + 1) * d];
                let dst = &mut gemb.data_mut()[idx as usize * d..(idx as usize + 1) * d];
                for (c, (g, s)) in dst.iter_mut().zip(src).enumerate() {
                    let factor = mask.map_or(1.0, |m| m.factor(t * d + c));
                    *g += s * factor;
                }
            }
        }
    }
    Ok(grads)
}
