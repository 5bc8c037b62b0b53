use gcn_core::checks::{model_grad_check, run_grad_check_suite, tiny_model, GRAD_CHECK_TOLERANCE};
use gcn_core::model::*;
use gcn_core::tensor::{self, Activation, Tensor, DEFAULT_EPSILON};
use gcn_core::text::{random_embeddings, EncodedExample, Vocabulary};
use gcn_core::{Error, Rng};

fn vocab() -> Vocabulary {
    let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    Vocabulary::build([words], 100)
}

fn small_config(gate: GateKind) -> ModelConfig {
    ModelConfig {
        gate,
        kernel_sizes: vec![3, 4, 5],
        filters: 4,
        embed_dim: 5,
        max_len: 9,
        dropout_embed: 0.5,
        dropout_dense: 0.2,
        train_embeddings: false,
    }
}

fn small_model(gate: GateKind, seed: u64) -> GcnParams {
    let v = vocab();
    let emb = random_embeddings(&v, 5, &mut Rng::new(seed + 100)).unwrap();
    init_model(&small_config(gate), &v, emb, &mut Rng::new(seed)).unwrap()
}

fn batch(seed: u64, n: usize) -> Vec<EncodedExample> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|e| {
            let len = rng.int_inclusive(1, 9);
            let mut indices: Vec<u32> = (0..len).map(|_| rng.int_inclusive(0, 12) as u32).collect();
            indices.resize(9, 0);
            EncodedExample {
                indices,
                label: (e % 2) as u8,
            }
        })
        .collect()
}

fn zero_params(p: &mut GcnParams) {
    for b in &mut p.branches {
        b.main_kernels.fill(0.0);
        b.main_bias.fill(0.0);
        if let Some(k) = b.gate_kernels.as_mut() {
            k.fill(0.0);
        }
        if let Some(k) = b.gate_bias.as_mut() {
            k.fill(0.0);
        }
    }
    p.dense_w.fill(0.0);
    p.dense_b.fill(0.0);
}

#[test]
fn probabilities_in_open_unit_interval() {
    for gate in GateKind::ALL {
        let p = small_model(gate, 1);
        let probs = predict_proba(&p, &batch(2, 16)).unwrap();
        assert!(probs.iter().all(|&x| x > 0.0 && x < 1.0), "{gate}: {probs:?}");
        let (train_probs, _) = forward(&p, &batch(2, 16), true, &mut Rng::new(3)).unwrap();
        assert!(train_probs.iter().all(|&x| x > 0.0 && x < 1.0));
    }
}

#[test]
fn zero_parameters_give_one_half_and_positive_labels() {
    for gate in GateKind::ALL {
        let mut p = small_model(gate, 1);
        zero_params(&mut p);
        let b = batch(4, 10);
        assert!(predict_proba(&p, &b).unwrap().iter().all(|&x| x == 0.5));
        assert!(predict(&p, &b).unwrap().iter().all(|&y| y == 1));
    }
}

#[test]
fn wrong_length_is_shape_error() {
    let p = small_model(GateKind::Glu, 1);
    let bad = EncodedExample {
        indices: vec![1, 2, 3],
        label: 0,
    };
    assert!(matches!(predict(&p, &[bad.clone()]), Err(Error::Shape(_))));
    assert!(matches!(
        forward(&p, &[bad], true, &mut Rng::new(0)),
        Err(Error::Shape(_))
    ));
}

#[test]
fn gtu_at_zero_preactivation_is_zero() {
    // tanh(0)·σ(0) = 0: with zero kernels and biases every pooled feature is 0.
    let mut p = small_model(GateKind::Gtu, 1);
    zero_params(&mut p);
    p.dense_w.fill(1.0);
    let z = logits(&p, &batch(5, 3)).unwrap();
    assert!(z.iter().all(|&v| v == 0.0));
}

#[test]
fn perfect_predictions_give_zero_gradients() {
    // Saturate the output so p equals the label to machine precision.
    let mut p = small_model(GateKind::Glu, 7);
    zero_params(&mut p);
    p.dense_b.data_mut()[0] = 800.0;
    let b: Vec<EncodedExample> = batch(1, 4)
        .into_iter()
        .map(|mut e| {
            e.label = 1;
            e
        })
        .collect();
    let (probs, cache) = forward(&p, &b, true, &mut Rng::new(1)).unwrap();
    assert!(probs.iter().all(|&x| x == 1.0));
    let g = backward(&p, &cache, &[1, 1, 1, 1]).unwrap();
    assert_eq!(g.max_abs(), 0.0);
}

#[test]
fn backward_rejects_mismatched_labels() {
    let p = small_model(GateKind::Glu, 1);
    let (_, cache) = forward(&p, &batch(1, 3), true, &mut Rng::new(1)).unwrap();
    assert!(matches!(backward(&p, &cache, &[0, 1]), Err(Error::InvalidArgument(_))));
}

#[test]
fn gtru_gate_gradient_vanishes_where_relu_closed() {
    let mut p = small_model(GateKind::Gtru, 3);
    // Force every gate pre-activation negative.
    for b in &mut p.branches {
        b.gate_kernels.as_mut().unwrap().fill(0.0);
        b.gate_bias.as_mut().unwrap().fill(-1.0);
    }
    let b = batch(9, 6);
    let labels: Vec<u8> = b.iter().map(|e| e.label).collect();
    let (_, cache) = forward(&p, &b, true, &mut Rng::new(2)).unwrap();
    let g = backward(&p, &cache, &labels).unwrap();
    for br in &g.branches {
        assert_eq!(br.gate_kernels.as_ref().unwrap().max_abs(), 0.0);
        assert_eq!(br.gate_bias.as_ref().unwrap().max_abs(), 0.0);
    }
}

#[test]
fn full_model_grad_check_every_gate() {
    for gate in GateKind::ALL {
        for seed in 0..3 {
            let (params, b) = tiny_model(gate, &[2], seed).unwrap();
            let err = model_grad_check(&params, &b, seed + 40, DEFAULT_EPSILON).unwrap();
            assert!(err <= GRAD_CHECK_TOLERANCE, "{gate} seed {seed}: {err}");
        }
    }
}

#[test]
fn grad_check_suite_passes() {
    let report = run_grad_check_suite(&[1, 2, 3]).unwrap();
    for r in &report.results {
        assert!(r.max_rel_error <= GRAD_CHECK_TOLERANCE, "{} seed {}: {}", r.name, r.seed, r.max_rel_error);
    }
    assert!(report.passed());
}

/// Single example, dropout off: the model's pooled-sparse backward must agree
/// with composing the dense tensor-core backward ops layer by layer.
#[test]
fn sparse_backward_matches_layerwise_composition() {
    for gate in GateKind::ALL {
        let mut p = small_model(gate, 11);
        p.config.dropout_embed = 0.0;
        p.config.dropout_dense = 0.0;
        for b in &mut p.branches {
            b.main_bias = Tensor::from_fn(&[4], |i| 0.1 * i as f64 - 0.15);
            if let Some(gb) = b.gate_bias.as_mut() {
                *gb = Tensor::from_fn(&[4], |i| 0.05 * i as f64 + 0.02);
            }
        }
        let ex = batch(21, 1).remove(0);
        let (probs, cache) = forward(&p, &[ex.clone()], true, &mut Rng::new(0)).unwrap();
        let g = backward(&p, &cache, &[ex.label]).unwrap();

        // Reference route.
        let d = 5;
        let input = Tensor::from_fn(&[9, d], |i| {
            let idx = ex.indices[i / d] as usize;
            p.embedding.row(idx)[i % d]
        });
        let mut feats = Vec::new();
        let mut caches = Vec::new();
        for b in &p.branches {
            let main_pre = tensor::conv1d_same(&input, &b.main_kernels, &b.main_bias).unwrap();
            let c = tensor::activation(gate.main_activation(), &main_pre);
            let (gated, gate_pre, s) = match (&b.gate_kernels, gate.gate_activation()) {
                (Some(k), Some(act)) => {
                    let gp = tensor::conv1d_same(&input, k, b.gate_bias.as_ref().unwrap()).unwrap();
                    let s = tensor::activation(act, &gp);
                    (tensor::elementwise_mul(&c, &s).unwrap(), Some(gp), Some(s))
                }
                _ => (c.clone(), None, None),
            };
            let (pooled, argmax) = tensor::maxpool_time(&gated).unwrap();
            feats.extend_from_slice(pooled.data());
            caches.push((main_pre, c, gate_pre, s, argmax));
        }
        let x = Tensor::new(vec![1, 12], feats).unwrap();
        let z = tensor::dense(&x, &p.dense_w, &p.dense_b).unwrap();
        let prob = tensor::sigmoid(z.data()[0]);
        assert!((prob - probs[0]).abs() < 1e-12);
        let (_, dldp) = tensor::bce_loss(prob, f64::from(ex.label)).unwrap();
        let dz = Tensor::new(vec![1, 1], vec![dldp * prob * (1.0 - prob)]).unwrap();
        let dg = tensor::dense_backward(&x, &p.dense_w, &dz).unwrap();
        assert_close(&dg.w, &g.dense_w);
        assert_close(&dg.b, &g.dense_b);
        for (bi, b) in p.branches.iter().enumerate() {
            let (main_pre, c, gate_pre, s, argmax) = &caches[bi];
            let up = Tensor::vector(dg.x.data()[bi * 4..(bi + 1) * 4].to_vec());
            let dgated = tensor::maxpool_time_backward(argmax, 9, &up).unwrap();
            let (dc, ds) = match s {
                Some(s) => {
                    let (dc, ds) = tensor::elementwise_mul_backward(c, s, &dgated).unwrap();
                    (dc, Some(ds))
                }
                None => (dgated, None),
            };
            let dmain = tensor::activation_backward(gate.main_activation(), main_pre, &dc).unwrap();
            let cg = tensor::conv1d_same_backward(&input, &b.main_kernels, &dmain).unwrap();
            assert_close(&cg.kernels, &g.branches[bi].main_kernels);
            assert_close(&cg.bias, &g.branches[bi].main_bias);
            if let (Some(ds), Some(gp)) = (ds, gate_pre) {
                let act: Activation = gate.gate_activation().unwrap();
                let dgate = tensor::activation_backward(act, gp, &ds).unwrap();
                let cg = tensor::conv1d_same_backward(&input, b.gate_kernels.as_ref().unwrap(), &dgate).unwrap();
                assert_close(&cg.kernels, g.branches[bi].gate_kernels.as_ref().unwrap());
                assert_close(&cg.bias, g.branches[bi].gate_bias.as_ref().unwrap());
            }
        }
    }
}

fn assert_close(a: &Tensor, b: &Tensor) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
    }
}

#[test]
fn gate_feature_bounds() {
    // GTU: |tanh·σ| < 1. GTRU: 0 wherever the gate pre-activation is ≤ 0.
    let v = vocab();
    let tokens: Vec<String> = (0..9).map(|i| format!("w{i}")).collect();
    let p = small_model(GateKind::Gtu, 5);
    let z = logits(&p, &batch(6, 8)).unwrap();
    let bound: f64 = p.dense_w.data().iter().map(|w| w.abs()).sum::<f64>() + p.dense_b.data()[0].abs();
    assert!(z.iter().all(|&l| l.abs() < bound));

    let p = small_model(GateKind::Gtru, 5);
    for map in gate_activations(&p, &v, &tokens).unwrap() {
        assert!(map.values.data().iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn gate_activation_ranges_and_mean_column() {
    let v = vocab();
    let tokens: Vec<String> = ["w1", "w2", "nope", "w3"].iter().map(|s| s.to_string()).collect();
    let p = small_model(GateKind::Glu, 8);
    let maps = gate_activations(&p, &v, &tokens).unwrap();
    assert_eq!(maps.len(), 3);
    for m in &maps {
        assert_eq!(m.values.shape(), &[9, 4]);
        assert!(m.values.data().iter().all(|&x| x > 0.0 && x < 1.0));
        for (i, row) in m.values.data().chunks(4).enumerate() {
            let mut acc = 0.0;
            for x in row {
                acc += x;
            }
            assert!((acc / 4.0 - m.mean[i]).abs() <= 1e-12);
        }
    }
    assert_eq!(maps[0].ngrams[0], "<pad> w1 w2");
    assert_eq!(maps[0].ngrams[3], "nope w3 <pad>");
    assert_eq!(maps[1].ngrams[0], "<pad> w1 w2 nope");

    let ungated = small_model(GateKind::Ungated, 8);
    assert!(matches!(
        gate_activations(&ungated, &v, &tokens),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn filter_permutation_leaves_outputs_unchanged() {
    for gate in GateKind::ALL {
        let p = small_model(gate, 12);
        let b = batch(13, 10);
        let before = predict_proba(&p, &b).unwrap();
        let mut q = p.clone();
        let perm = [2usize, 0, 3, 1];
        let (h_d, f) = (5, 4);
        for (bi, br) in q.branches.iter_mut().enumerate() {
            let orig = p.branches[bi].clone();
            let hd = br.kernel_size * h_d;
            for (new_k, &old_k) in perm.iter().enumerate() {
                br.main_kernels.data_mut()[new_k * hd..(new_k + 1) * hd]
                    .copy_from_slice(&orig.main_kernels.data()[old_k * hd..(old_k + 1) * hd]);
                br.main_bias.data_mut()[new_k] = orig.main_bias.data()[old_k];
                if let Some(gk) = br.gate_kernels.as_mut() {
                    gk.data_mut()[new_k * hd..(new_k + 1) * hd]
                        .copy_from_slice(&orig.gate_kernels.as_ref().unwrap().data()[old_k * hd..(old_k + 1) * hd]);
                    br.gate_bias.as_mut().unwrap().data_mut()[new_k] = orig.gate_bias.as_ref().unwrap().data()[old_k];
                }
                q.dense_w.data_mut()[bi * f + new_k] = p.dense_w.data()[bi * f + old_k];
            }
        }
        let after = predict_proba(&q, &b).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() <= 1e-12, "{gate}: {x} vs {y}");
        }
    }
}

#[test]
fn labels_follow_logit_sign_under_monotone_transforms() {
    let p = small_model(GateKind::Glu, 14);
    let b = batch(15, 20);
    let z = logits(&p, &b).unwrap();
    let labels = predict(&p, &b).unwrap();
    for (zi, yi) in z.iter().zip(&labels) {
        assert_eq!(*yi, u8::from(*zi >= 0.0));
        // Any strictly increasing map that fixes 0 keeps the label.
        let t = zi.powi(3) + 2.0 * zi;
        assert_eq!(*yi, u8::from(t >= 0.0));
    }
}

#[test]
fn same_seed_same_parameters() {
    assert_eq!(small_model(GateKind::Gtru, 99), small_model(GateKind::Gtru, 99));
    assert_ne!(small_model(GateKind::Gtru, 99), small_model(GateKind::Gtru, 98));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for gate in GateKind::ALL {
        let mut p = small_model(gate, 21);
        p.embedding.trainable = gate == GateKind::Gtu;
        let path = dir.path().join(format!("{gate}.gcnc"));
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
        let b = batch(22, 6);
        assert_eq!(predict_proba(&p, &b).unwrap(), predict_proba(&q, &b).unwrap());
    }
}

#[test]
fn checkpoint_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_model(GateKind::Glu, 23);
    let path = dir.path().join("m.gcnc");
    save_checkpoint(&p, &path).unwrap();
    let good = std::fs::read(&path).unwrap();

    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    std::fs::write(&path, &bad_magic).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::MagicMismatch { .. })));

    let mut bad_version = good.clone();
    bad_version[4] = 9;
    std::fs::write(&path, &bad_version).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::UnsupportedVersion(9))));

    std::fs::write(&path, &good[..good.len() - 5]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Truncated(_))));

    std::fs::write(&path, &good[..3]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Truncated(_))));
}

#[test]
fn standard_dims_checkpoint_size() {
    // Non-embedding payload is 720,901 doubles; embedding adds rows·d doubles.
    let words: Vec<String> = (0..9).map(|i| format!("w{i}")).collect();
    let v = Vocabulary::build([words], 100);
    let cfg = ModelConfig::standard(GateKind::Glu);
    let emb = random_embeddings(&v, 300, &mut Rng::new(1)).unwrap();
    let p = init_model(&cfg, &v, emb, &mut Rng::new(2)).unwrap();
    assert_eq!(p.param_count(), 720_901);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("standard.gcnc");
    save_checkpoint(&p, &path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len() as usize;
    let payload = (720_901 + 10 * 300) * 8;
    assert!(size > payload && size < payload + 4096, "{size}");
}
