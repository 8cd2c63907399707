use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqadapt_core::encoder::{
    forward, init_params, loss_and_gradients, mlm_log_probs, tag_log_probs, EncoderConfig,
    Example, Head, LossOptions, ModelParams,
};
use seqadapt_core::encoder::gradcheck::{gradient_check, TensorCheck};
use seqadapt_core::rng_from_seed;

fn small_config(dropout: f64) -> EncoderConfig {
    EncoderConfig {
        num_layers: 2,
        hidden_dim: 8,
        num_heads: 2,
        ffn_dim: 16,
        vocab_size: 17,
        max_len: 12,
        num_tags: 5,
        dropout_rate: dropout,
    }
}

struct Batch {
    ids: Vec<Vec<u32>>,
    targets: Vec<Vec<Option<u32>>>,
}

impl Batch {
    fn examples(&self) -> Vec<Example<'_>> {
        self.ids
            .iter()
            .zip(&self.targets)
            .map(|(i, t)| Example {
                piece_ids: i,
                targets: t,
            })
            .collect()
    }
}

fn random_batch(cfg: &EncoderConfig, head: Head, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = match head {
        Head::Mlm => cfg.vocab_size,
        Head::Tag => cfg.num_tags,
    } as u32;
    let mut ids = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..3 {
        let len = rng.random_range(3..=cfg.max_len);
        let mut seq: Vec<u32> = (0..len)
            .map(|_| rng.random_range(5..cfg.vocab_size as u32))
            .collect();
        seq[0] = 2;
        // trailing padding exercises the attention mask
        if rng.random_bool(0.5) && len > 4 {
            seq[len - 1] = 0;
        }
        let tgt: Vec<Option<u32>> = (0..len)
            .map(|i| (i > 0 && seq[i] != 0 && rng.random_bool(0.5)).then(|| rng.random_range(0..classes)))
            .collect();
        ids.push(seq);
        targets.push(tgt);
    }
    if targets.iter().flatten().all(Option::is_none) {
        targets[0][1] = Some(0);
    }
    Batch { ids, targets }
}

/// Per-tensor relative errors against central differences.
fn check_gradients(seed: u64, head: Head) -> Vec<TensorCheck> {
    let cfg = small_config(0.1);
    let mut params = init_params::<f64>(&cfg, seed).unwrap();
    // Larger weights than the 0.02 init give gradients well above FD noise.
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    params.for_each_mut(|_, t| t.data.iter_mut().for_each(|x| *x += r.random_range(-0.3..0.3)));
    let batch = random_batch(&cfg, head, seed + 100);
    gradient_check(&params, &batch.examples(), LossOptions::new(head), seed + 7, 1e-3).unwrap()
}

#[test]
fn gradients_match_central_differences_for_both_heads() {
    for seed in [1, 2] {
        for head in [Head::Mlm, Head::Tag] {
            for c in check_gradients(seed, head) {
                assert!(
                    c.relative_error <= 1e-3,
                    "seed {seed} {head:?} {}: relative error {:e}",
                    c.name,
                    c.relative_error
                );
            }
        }
    }
}

#[test]
fn head_tensors_not_used_by_the_loss_get_zero_gradient() {
    let cfg = small_config(0.0);
    let params = init_params::<f64>(&cfg, 3).unwrap();
    let batch = random_batch(&cfg, Head::Mlm, 9);
    let mut rng = rng_from_seed(0);
    let (_, g) =
        loss_and_gradients(&params, &batch.examples(), LossOptions::new(Head::Mlm), &mut rng).unwrap();
    assert!(g.0.tag_weight.data.iter().all(|&x| x == 0.0));
    assert!(g.0.tag_bias.data.iter().all(|&x| x == 0.0));
}

#[test]
fn frozen_encoder_only_produces_head_gradients() {
    let cfg = small_config(0.1);
    let params = init_params::<f64>(&cfg, 3).unwrap();
    let batch = random_batch(&cfg, Head::Tag, 9);
    let mut rng = rng_from_seed(0);
    let opts = LossOptions {
        head: Head::Tag,
        train_mode: false,
        freeze_encoder: true,
    };
    let (_, g) = loss_and_gradients(&params, &batch.examples(), opts, &mut rng).unwrap();
    g.0.for_each(|name, t| {
        if ModelParams::<f64>::is_encoder_tensor(name) {
            assert!(t.data.iter().all(|&x| x == 0.0), "{name}");
        }
    });
    assert!(g.0.tag_weight.data.iter().any(|&x| x != 0.0));
}

#[test]
fn forward_shapes_determinism_and_attention_normalization() {
    let cfg = small_config(0.1);
    let params = init_params::<f64>(&cfg, 5).unwrap();
    let ids = [2u32, 7, 9, 11, 3, 0, 0];
    let mut rng = rng_from_seed(1);
    let a = forward(&params, &ids, false, &mut rng).unwrap();
    let b = forward(&params, &ids, false, &mut rng).unwrap();
    assert_eq!(a.contextual.rows(), ids.len());
    assert_eq!(a.contextual, b.contextual);
    let t = ids.len();
    for layer in 0..cfg.num_layers {
        let probs = a.attention(layer);
        for row in probs.chunks(t) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert_eq!(row[5], 0.0);
            assert_eq!(row[6], 0.0);
        }
    }
    let mut rng = rng_from_seed(1);
    let c = forward(&params, &ids, true, &mut rng).unwrap();
    assert_ne!(a.contextual, c.contextual);

    assert!(forward(&params, &[2, 99], false, &mut rng).is_err());
    assert!(forward(&params, &[2; 13], false, &mut rng).is_err());
}

#[test]
fn zero_heads_give_uniform_log_probs() {
    let mut cfg = small_config(0.0);
    cfg.num_tags = 4;
    let mut params = init_params::<f64>(&cfg, 5).unwrap();
    params.tag_weight.data.iter_mut().for_each(|x| *x = 0.0);
    params.mlm_weight.data.iter_mut().for_each(|x| *x = 0.0);
    let mut rng = rng_from_seed(1);
    let out = forward(&params, &[2, 8, 9, 3], false, &mut rng).unwrap();
    let lp = tag_log_probs(&params, &out);
    assert_eq!(lp.shape, vec![4, 4]);
    for &v in &lp.data {
        assert!((v + 4f64.ln()).abs() < 1e-9);
    }
    assert!((lp.data[0] + 1.3863).abs() < 1e-4);
    let lp = mlm_log_probs(&params, &out);
    for &v in &lp.data {
        assert!((v + (cfg.vocab_size as f64).ln()).abs() < 1e-9);
    }
}

#[test]
fn log_prob_rows_normalize_and_ignore_constant_shifts() {
    let cfg = small_config(0.0);
    let mut params = init_params::<f64>(&cfg, 5).unwrap();
    let mut rng = rng_from_seed(1);
    let out = forward(&params, &[2, 8, 9, 10, 3], false, &mut rng).unwrap();
    let tag = tag_log_probs(&params, &out);
    let mlm = mlm_log_probs(&params, &out);
    for lp in [&tag, &mlm] {
        for row in lp.data.chunks(lp.cols()) {
            let s: f64 = row.iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
    params.tag_bias.data.iter_mut().for_each(|b| *b += 3.7);
    params.mlm_bias.data.iter_mut().for_each(|b| *b -= 1.25);
    let tag2 = tag_log_probs(&params, &out);
    let mlm2 = mlm_log_probs(&params, &out);
    for (a, b) in tag.data.iter().zip(&tag2.data).chain(mlm.data.iter().zip(&mlm2.data)) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn loss_on_uniform_logits_is_log_classes() {
    let mut cfg = small_config(0.0);
    cfg.num_tags = 4;
    let mut params = init_params::<f64>(&cfg, 5).unwrap();
    params.tag_weight.data.iter_mut().for_each(|x| *x = 0.0);
    let ids = [2u32, 8, 3];
    let targets = [None, Some(2), None];
    let mut rng = rng_from_seed(1);
    let (loss, _) = loss_and_gradients(
        &params,
        &[Example {
            piece_ids: &ids,
            targets: &targets,
        }],
        LossOptions::new(Head::Tag),
        &mut rng,
    )
    .unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);
}

#[test]
fn loss_is_a_mean_over_targets() {
    let cfg = small_config(0.0);
    let params = init_params::<f64>(&cfg, 5).unwrap();
    let batch = random_batch(&cfg, Head::Tag, 4);
    let ex = batch.examples();
    let mut doubled = ex.clone();
    doubled.extend(ex.iter().copied());
    let mut reversed = ex.clone();
    reversed.reverse();
    let mut rng = rng_from_seed(0);
    let opts = LossOptions::new(Head::Tag);
    let (l1, _) = loss_and_gradients(&params, &ex, opts, &mut rng).unwrap();
    let (l2, _) = loss_and_gradients(&params, &doubled, opts, &mut rng).unwrap();
    let (l3, _) = loss_and_gradients(&params, &reversed, opts, &mut rng).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    assert!((l1 - l3).abs() < 1e-12);
}

#[test]
fn all_ignored_batch_is_an_error() {
    let cfg = small_config(0.0);
    let params = init_params::<f64>(&cfg, 5).unwrap();
    let ids = [2u32, 8, 3];
    let targets = [None, None, None];
    let mut rng = rng_from_seed(1);
    let r = loss_and_gradients(
        &params,
        &[Example {
            piece_ids: &ids,
            targets: &targets,
        }],
        LossOptions::new(Head::Mlm),
        &mut rng,
    );
    assert_eq!(r.unwrap_err(), seqadapt_core::Error::NoTargets);
}
