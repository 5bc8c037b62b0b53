use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{glorot_uniform, Tensor};
use crate::text::{EmbeddingMatrix, Vocabulary};

use super::GateKind;

/// Architecture and regularization settings of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub gate: GateKind,
    pub kernel_sizes: Vec<usize>,
    pub filters: usize,
    pub embed_dim: usize,
    pub max_len: usize,
    /// Drop probability on the embedded input.
    pub dropout_embed: f64,
    /// Drop probability on the pooled features feeding the output layer.
    pub dropout_dense: f64,
    pub train_embeddings: bool,
}

impl ModelConfig {
    /// 100 filters for each of widths 3, 4 and 5 over 300-d embeddings, inputs
    /// of 100 tokens, dropout 0.5 on embeddings and 0.2 before the output.
    pub fn standard(gate: GateKind) -> Self {
        Self {
            gate,
            kernel_sizes: vec![3, 4, 5],
            filters: 100,
            embed_dim: 300,
            max_len: 100,
            dropout_embed: 0.5,
            dropout_dense: 0.2,
            train_embeddings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_sizes.is_empty() || self.kernel_sizes.contains(&0) {
            return Err(Error::invalid("kernel sizes must be a non-empty list of positive widths"));
        }
        if self.filters == 0 || self.embed_dim == 0 || self.max_len == 0 {
            return Err(Error::invalid("filters, embed_dim and max_len must be positive"));
        }
        for (name, p) in [("dropout_embed", self.dropout_embed), ("dropout_dense", self.dropout_dense)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        self.kernel_sizes.len() * self.filters
    }

    /// Closed-form count of trainable scalars outside the embedding table.
    pub fn param_count(&self) -> usize {
        let branches = if self.gate.is_gated() { 2 } else { 1 };
        let conv: usize = self
            .kernel_sizes
            .iter()
            .map(|h| branches * (h * self.embed_dim * self.filters + self.filters))
            .sum();
        conv + self.feature_len() + 1
    }

    pub(crate) fn pad_extent(&self) -> (usize, usize) {
        let mut before = 0;
        let mut after = 0;
        for &h in &self.kernel_sizes {
            let (b, a) = crate::tensor::same_padding(h);
            before = before.max(b);
            after = after.max(a);
        }
        (before, after)
    }
}

/// Where a parameter set came from, carried into checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ModelMeta {
    pub seed: u64,
    pub vocab_hash: String,
}

/// One convolution width: the main kernels and, for gated models, the gate
/// kernels. Kernels are `[F × h × d]`, biases `[F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBranch {
    pub kernel_size: usize,
    pub main_kernels: Tensor,
    pub main_bias: Tensor,
    pub gate_kernels: Option<Tensor>,
    pub gate_bias: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub config: ModelConfig,
    pub branches: Vec<ConvBranch>,
    /// `[branches·F × 1]`
    pub dense_w: Tensor,
    pub dense_b: Tensor,
    pub embedding: EmbeddingMatrix,
    pub meta: ModelMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchGrads {
    pub main_kernels: Tensor,
    pub main_bias: Tensor,
    pub gate_kernels: Option<Tensor>,
    pub gate_bias: Option<Tensor>,
}

/// Gradients shaped like [`GcnParams`]. `embedding` is present only when the
/// embedding table is trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub branches: Vec<BranchGrads>,
    pub dense_w: Tensor,
    pub dense_b: Tensor,
    pub embedding: Option<Tensor>,
}

/// Glorot-uniform kernels and output weights, zero biases. The embedding table
/// is taken as given; its `trainable` flag follows `config.train_embeddings`.
pub fn init_model(
    config: &ModelConfig,
    vocab: &Vocabulary,
    mut embedding: EmbeddingMatrix,
    rng: &mut Rng,
) -> Result<GcnParams> {
    config.validate()?;
    if embedding.dim() != config.embed_dim {
        return Err(Error::shape(format!(
            "embedding width {} does not match configured {}",
            embedding.dim(),
            config.embed_dim
        )));
    }
    if embedding.rows() != vocab.rows() {
        return Err(Error::shape(format!(
            "embedding has {} rows, vocabulary needs {}",
            embedding.rows(),
            vocab.rows()
        )));
    }
    embedding.trainable = config.train_embeddings;
    let (f, d) = (config.filters, config.embed_dim);
    let mut branches = Vec::with_capacity(config.kernel_sizes.len());
    for &h in &config.kernel_sizes {
        let main_kernels = glorot_uniform(rng, h * d, f, &[f, h, d])?;
        let (gate_kernels, gate_bias) = if config.gate.is_gated() {
            (
                Some(glorot_uniform(rng, h * d, f, &[f, h, d])?),
                Some(Tensor::zeros(&[f])),
            )
        } else {
            (None, None)
        };
        branches.push(ConvBranch {
            kernel_size: h,
            main_kernels,
            main_bias: Tensor::zeros(&[f]),
            gate_kernels,
            gate_bias,
        });
    }
    let dense_w = glorot_uniform(rng, config.feature_len(), 1, &[config.feature_len(), 1])?;
    Ok(GcnParams {
        config: config.clone(),
        branches,
        dense_w,
        dense_b: Tensor::zeros(&[1]),
        embedding,
        meta: ModelMeta {
            seed: rng.seed(),
            vocab_hash: vocab.content_hash(),
        },
    })
}

impl GcnParams {
    /// Every tensor except the embedding table, in checkpoint order.
    pub fn weight_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for b in &self.branches {
            out.push(&b.main_kernels);
            out.push(&b.main_bias);
            out.extend(b.gate_kernels.as_ref());
            out.extend(b.gate_bias.as_ref());
        }
        out.push(&self.dense_w);
        out.push(&self.dense_b);
        out
    }


    /// Tensors updated by the optimizer, in the order of [`GcnGrads::tensors`].
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        let trainable = self.embedding.trainable;
        let mut out = Vec::new();
        for b in &mut self.branches {
            out.push(&mut b.main_kernels);
            out.push(&mut b.main_bias);
            out.extend(b.gate_kernels.as_mut());
            out.extend(b.gate_bias.as_mut());
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        if trainable {
            out.push(&mut self.embedding.matrix);
        }
        out
    }

    pub fn trainable_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes: Vec<Vec<usize>> = self.weight_tensors().iter().map(|t| t.shape().to_vec()).collect();
        if self.embedding.trainable {
            shapes.push(self.embedding.matrix.shape().to_vec());
        }
        shapes
    }

    /// Trainable scalars outside the embedding table, counted from the tensors.
    pub fn param_count(&self) -> usize {
        self.weight_tensors().iter().map(|t| t.len()).sum()
    }
}

impl GcnGrads {
    pub(crate) fn zeros_like(params: &GcnParams) -> Self {
        Self {
            branches: params
                .branches
                .iter()
                .map(|b| BranchGrads {
                    main_kernels: Tensor::zeros(b.main_kernels.shape()),
                    main_bias: Tensor::zeros(b.main_bias.shape()),
                    gate_kernels: b.gate_kernels.as_ref().map(|t| Tensor::zeros(t.shape())),
                    gate_bias: b.gate_bias.as_ref().map(|t| Tensor::zeros(t.shape())),
                })
                .collect(),
            dense_w: Tensor::zeros(params.dense_w.shape()),
            dense_b: Tensor::zeros(params.dense_b.shape()),
            embedding: params
                .embedding
                .trainable
                .then(|| Tensor::zeros(params.embedding.matrix.shape())),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for b in &self.branches {
            out.push(&b.main_kernels);
            out.push(&b.main_bias);
            out.extend(b.gate_kernels.as_ref());
            out.extend(b.gate_bias.as_ref());
        }
        out.push(&self.dense_w);
        out.push(&self.dense_b);
        out.extend(self.embedding.as_ref());
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().iter().fold(0.0, |m, t| m.max(t.max_abs()))
    }
}
