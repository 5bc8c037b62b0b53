//! Finite-difference verification of every backward pass, from single layer
//! kernels up to a complete tiny model of each gate kind.

use crate::error::Result;
use crate::model::{backward, forward, init_model, GateKind, GcnParams, ModelConfig};
use crate::rng::Rng;
use crate::tensor::*;
use crate::text::{random_embeddings, EncodedExample, Vocabulary};

/// Maximum relative error tolerated by the suite.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub seed: u64,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.results.iter().fold(0.0, |m, r| m.max(r.max_rel_error))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() <= GRAD_CHECK_TOLERANCE
    }
}

fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.uniform_range(-1.0, 1.0))
}

/// Values at least 0.1 away from zero, for checks that pass through relu.
fn random_off_kink(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let v = rng.uniform_range(0.1, 1.5);
        if rng.bernoulli(0.5) {
            v
        } else {
            -v
        }
    })
}

fn project(t: &Tensor, r: &Tensor) -> f64 {
    t.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn layer_checks(seed: u64, out: &mut Vec<CheckResult>) -> Result<()> {
    let eps = DEFAULT_EPSILON;
    let mut rng = Rng::new(seed);
    let mut push = |name: &str, err: f64| {
        out.push(CheckResult {
            name: name.to_string(),
            seed,
            max_rel_error: err,
        })
    };

    // conv1d_same, N=7, d=2, h=3, F=2
    let input = random(&mut rng, &[7, 2]);
    let kernels = random(&mut rng, &[2, 3, 2]);
    let bias = random(&mut rng, &[2]);
    let r = random(&mut rng, &[7, 2]);
    let g = conv1d_same_backward(&input, &kernels, &r)?;
    push(
        "conv1d_same",
        grad_check(
            |ts| project(&conv1d_same(&ts[0], &ts[1], &ts[2]).expect("shapes fixed"), &r),
            &[input, kernels, bias],
            &[g.input, g.kernels, g.bias],
            eps,
        ),
    );

    // dense, 4 → 3
    let x = random(&mut rng, &[4]);
    let w = random(&mut rng, &[4, 3]);
    let b = random(&mut rng, &[3]);
    let r = random(&mut rng, &[3]);
    let g = dense_backward(&x, &w, &r)?;
    push(
        "dense",
        grad_check(
            |ts| project(&dense(&ts[0], &ts[1], &ts[2]).expect("shapes fixed"), &r),
            &[x, w, b],
            &[g.x, g.w, g.b],
            eps,
        ),
    );

    for kind in [Activation::Identity, Activation::Tanh, Activation::Sigmoid, Activation::Relu] {
        let x = random_off_kink(&mut rng, &[5, 3]);
        let r = random(&mut rng, &[5, 3]);
        let g = activation_backward(kind, &x, &r)?;
        push(
            &format!("activation/{kind:?}").to_lowercase(),
            grad_check(|ts| project(&activation(kind, &ts[0]), &r), &[x], &[g], eps),
        );
    }

    let a = random(&mut rng, &[3, 4]);
    let b = random(&mut rng, &[3, 4]);
    let r = random(&mut rng, &[3, 4]);
    let (ga, gb) = elementwise_mul_backward(&a, &b, &r)?;
    push(
        "elementwise_mul",
        grad_check(
            |ts| project(&elementwise_mul(&ts[0], &ts[1]).expect("shapes fixed"), &r),
            &[a, b],
            &[ga, gb],
            eps,
        ),
    );

    let x = random(&mut rng, &[6, 4]);
    let r = random(&mut rng, &[4]);
    let (_, argmax) = maxpool_time(&x)?;
    let g = maxpool_time_backward(&argmax, 6, &r)?;
    push(
        "maxpool_time",
        grad_check(
            |ts| project(&maxpool_time(&ts[0]).expect("non-empty").0, &r),
            &[x],
            &[g],
            eps,
        ),
    );

    let x = random(&mut rng, &[10]);
    let r = random(&mut rng, &[10]);
    let mask_rng = rng.fork(1);
    let (_, mask) = dropout(&x, 0.6, &mut mask_rng.clone(), true)?;
    let g = dropout_backward(&mask, &r)?;
    push(
        "dropout",
        grad_check(
            |ts| project(&dropout(&ts[0], 0.6, &mut mask_rng.clone(), true).expect("valid").0, &r),
            &[x],
            &[g],
            eps,
        ),
    );

    let p = rng.uniform_range(0.1, 0.9);
    let y = if rng.bernoulli(0.5) { 1.0 } else { 0.0 };
    let (_, g) = bce_loss(p, y)?;
    push(
        "bce_loss",
        grad_check(
            |ts| bce_loss(ts[0].data()[0], y).expect("binary label").0,
            &[Tensor::vector(vec![p])],
            &[Tensor::vector(vec![g])],
            eps,
        ),
    );
    Ok(())
}

/// A small model with every weight and bias drawn from U[-1, 1] and a
/// trainable embedding table, plus a batch that mixes words and padding.
pub fn tiny_model(gate: GateKind, kernel_sizes: &[usize], seed: u64) -> Result<(GcnParams, Vec<EncodedExample>)> {
    let mut rng = Rng::new(seed);
    let words: Vec<String> = (0..5).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::build([words.clone()], 10);
    let cfg = ModelConfig {
        gate,
        kernel_sizes: kernel_sizes.to_vec(),
        filters: 2,
        embed_dim: 3,
        max_len: 6,
        dropout_embed: 0.5,
        dropout_dense: 0.2,
        train_embeddings: true,
    };
    let mut emb = random_embeddings(&vocab, 3, &mut rng)?;
    for v in emb.matrix.data_mut()[3..].iter_mut() {
        *v = rng.uniform_range(-1.0, 1.0);
    }
    let mut params = init_model(&cfg, &vocab, emb, &mut rng)?;
    for t in params.trainable_mut() {
        let skip_pad_row = t.rank() == 2 && t.shape()[1] == 3 && t.shape()[0] == vocab.rows();
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            if skip_pad_row && i < 3 {
                continue;
            }
            *v = rng.uniform_range(-1.0, 1.0);
        }
    }
    let batch = (0..4)
        .map(|e| {
            let len = 3 + e % 3;
            let mut indices: Vec<u32> = (0..len).map(|_| rng.int_inclusive(0, vocab.len()) as u32).collect();
            indices.resize(6, 0);
            EncodedExample {
                indices,
                label: (e % 2) as u8,
            }
        })
        .collect();
    Ok((params, batch))
}

fn with_trainable(params: &GcnParams, values: &[Tensor]) -> GcnParams {
    let mut p = params.clone();
    for (dst, src) in p.trainable_mut().into_iter().zip(values) {
        dst.data_mut().copy_from_slice(src.data());
    }
    p
}

/// Relative error between [`backward`] and central differences of the
/// training-mode loss, with dropout masks pinned by `dropout_seed`.
pub fn model_grad_check(params: &GcnParams, batch: &[EncodedExample], dropout_seed: u64, epsilon: f64) -> Result<f64> {
    let labels: Vec<u8> = batch.iter().map(|e| e.label).collect();
    let targets: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
    let (_, cache) = forward(params, batch, true, &mut Rng::new(dropout_seed))?;
    let grads = backward(params, &cache, &labels)?;
    let analytic: Vec<Tensor> = grads.tensors().into_iter().cloned().collect();
    let mut base = params.clone();
    let inputs: Vec<Tensor> = base.trainable_mut().into_iter().map(|t| t.clone()).collect();
    Ok(grad_check(
        |ts| {
            let p = with_trainable(params, ts);
            let (probs, _) = forward(&p, batch, true, &mut Rng::new(dropout_seed)).expect("valid batch");
            mean_bce_loss(&probs, &targets).expect("binary labels")
        },
        &inputs,
        &analytic,
        epsilon,
    ))
}

/// Runs the layer checks and the tiny-model check for every gate kind, once per
/// seed.
pub fn run_grad_check_suite(seeds: &[u64]) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for &seed in seeds {
        layer_checks(seed, &mut report.results)?;
        for gate in GateKind::ALL {
            for sizes in [&[2][..], &[2, 3][..]] {
                let (params, batch) = tiny_model(gate, sizes, seed)?;
                let err = model_grad_check(&params, &batch, seed ^ 0x5eed, DEFAULT_EPSILON)?;
                let widths: Vec<String> = sizes.iter().map(|h| h.to_string()).collect();
                report.results.push(CheckResult {
                    name: format!("model/{gate} h={}", widths.join(",")),
                    seed,
                    max_rel_error: err,
                });
            }
        }
    }
    Ok(report)
}
