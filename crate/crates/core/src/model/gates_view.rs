use crate::error::{Error, Result};
use crate::tensor::{gemm_windows, Tensor};
use crate::text::Vocabulary;

use super::GcnParams;

/// Label used for window positions outside the sentence.
pub const PAD_TOKEN: &str = "<pad>";

/// Gate outputs of one convolution width for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchGateMap {
    pub kernel_size: usize,
    /// `[N × F]` values of `g(conv_gate(P))`.
    pub values: Tensor,
    /// Per-position mean over the F filters.
    pub mean: Vec<f64>,
    /// The h tokens each row's window covers, space-joined.
    pub ngrams: Vec<String>,
}

/// Inference-mode gate activations for an already encoded sentence. `tokens`
/// only labels the rows.
pub fn gate_activations_indices(params: &GcnParams, indices: &[u32], tokens: &[String]) -> Result<Vec<BranchGateMap>> {
    let cfg = &params.config;
    let Some(gate_act) = cfg.gate.gate_activation() else {
        return Err(Error::Unsupported(
            "gate activations requested from an ungated model".into(),
        ));
    };
    if indices.len() != cfg.max_len {
        return Err(Error::shape(format!(
            "example has {} positions, model expects {}",
            indices.len(),
            cfg.max_len
        )));
    }
    let (n, d, f) = (cfg.max_len, cfg.embed_dim, cfg.filters);
    let (pad_before, pad_after) = cfg.pad_extent();
    let mut padded = vec![0.0; (n + pad_before + pad_after) * d];
    for (t, &idx) in indices.iter().enumerate() {
        if idx as usize >= params.embedding.rows() {
            return Err(Error::invalid(format!("token index {idx} outside embedding table")));
        }
        padded[(pad_before + t) * d..(pad_before + t + 1) * d].copy_from_slice(params.embedding.row(idx as usize));
    }

    let mut maps = Vec::with_capacity(params.branches.len());
    for branch in &params.branches {
        let h = branch.kernel_size;
        let (own_before, _) = crate::tensor::same_padding(h);
        let kernels = branch.gate_kernels.as_ref().expect("gated model has gate kernels");
        let bias = branch.gate_bias.as_ref().expect("gated model has gate bias");
        let mut pre = vec![0.0; n * f];
        gemm_windows(
            &padded,
            n,
            d,
            h,
            pad_before - own_before,
            kernels.data(),
            f,
            bias.data(),
            &mut pre,
        );
        let values: Vec<f64> = pre.iter().map(|&x| gate_act.apply(x)).collect();
        let mean = values.chunks_exact(f).map(|r| r.iter().sum::<f64>() / f as f64).collect();
        let ngrams = (0..n)
            .map(|i| {
                (0..h)
                    .map(|j| {
                        let pos = i as isize + j as isize - own_before as isize;
                        if pos < 0 || pos as usize >= n {
                            PAD_TOKEN
                        } else {
                            tokens.get(pos as usize).map_or(PAD_TOKEN, String::as_str)
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        maps.push(BranchGateMap {
            kernel_size: h,
            values: Tensor::new(vec![n, f], values)?,
            mean,
            ngrams,
        });
    }
    Ok(maps)
}

/// Gate activations of every branch for a tokenized sentence.
pub fn gate_activations(params: &GcnParams, vocab: &Vocabulary, tokens: &[String]) -> Result<Vec<BranchGateMap>> {
    let indices = vocab.encode_pad(tokens, params.config.max_len);
    gate_activations_indices(params, &indices, tokens)
}
