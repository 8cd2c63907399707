use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::ops::{
    add_rows, axpy, col_sum_acc, dot, gelu, gelu_grad, layer_norm, layer_norm_backward,
    log_softmax_in_place, matmul_acc, matmul_nt_acc, matmul_tn_acc, softmax_in_place,
};
use super::{GradientSet, LayerParams, ModelParams, Scalar, Tensor};
use crate::tokenizer::PAD;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone)]
struct LayerCache<T> {
    input: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `heads × T × T`
    probs: Vec<T>,
    ctx: Vec<T>,
    attn_drop: Option<Vec<T>>,
    norm1_xhat: Vec<T>,
    norm1_inv: Vec<T>,
    h1: Vec<T>,
    ffn_pre: Vec<T>,
    ffn_act: Vec<T>,
    ffn_drop: Option<Vec<T>>,
    norm2_xhat: Vec<T>,
    norm2_inv: Vec<T>,
}

/// Contextual vectors for one sequence, one row per input piece.
#[derive(Debug, Clone)]
pub struct EncoderOutput<T> {
    pub contextual: Tensor<T>,
    /// `false` at padding positions, which never receive attention.
    pub attention_mask: Vec<bool>,
    piece_ids: Vec<u32>,
    emb_drop: Option<Vec<T>>,
    layers: Vec<LayerCache<T>>,
}

impl<T: Scalar> EncoderOutput<T> {
    pub fn len(&self) -> usize {
        self.contextual.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Attention probabilities of `layer`, laid out `heads × T × T`.
    pub fn attention(&self, layer: usize) -> &[T] {
        &self.layers[layer].probs
    }
}

fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut Rng) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            if u < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

fn apply_mask<T: Scalar>(x: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        x.iter_mut().zip(m).for_each(|(a, &b)| *a *= b);
    }
}

fn linear<T: Scalar>(x: &[T], weight: &Tensor<T>, bias: &Tensor<T>, rows: usize) -> Vec<T> {
    let (k, n) = (weight.rows(), weight.cols());
    let mut out = vec![T::zero(); rows * n];
    matmul_acc(&mut out, x, &weight.data, rows, k, n);
    add_rows(&mut out, &bias.data);
    out
}

/// Embeds `piece_ids` and runs every encoder layer. Dropout (inverted) is
/// applied only when `train_mode` is set; `rng` is not touched otherwise.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    piece_ids: &[u32],
    train_mode: bool,
    rng: &mut Rng,
) -> Result<EncoderOutput<T>> {
    let cfg = &params.config;
    let (len, h) = (piece_ids.len(), cfg.hidden_dim);
    if len > cfg.max_len {
        return Err(Error::SequenceTooLong {
            len,
            max_len: cfg.max_len,
        });
    }
    if let Some(&id) = piece_ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(Error::IdOutOfRange {
            id,
            vocab_size: cfg.vocab_size,
        });
    }
    let rate = if train_mode { cfg.dropout_rate } else { 0.0 };
    let mut draw_mask = |n: usize| (rate > 0.0).then(|| dropout_mask::<T>(n, rate, rng));

    let mut x = vec![T::zero(); len * h];
    for (t, &id) in piece_ids.iter().enumerate() {
        let row = &mut x[t * h..(t + 1) * h];
        row.copy_from_slice(params.token_embeddings.row(id as usize));
        axpy(row, T::one(), params.position_embeddings.row(t));
    }
    let emb_drop = draw_mask(len * h);
    apply_mask(&mut x, &emb_drop);

    let attention_mask: Vec<bool> = piece_ids.iter().map(|&id| id != PAD).collect();
    let mut layers = Vec::with_capacity(cfg.num_layers);
    for lp in &params.layers {
        let (cache, out) = layer_forward(lp, x, &attention_mask, cfg.num_heads, &mut draw_mask);
        x = out;
        layers.push(cache);
    }

    Ok(EncoderOutput {
        contextual: Tensor {
            shape: vec![len, h],
            data: x,
        },
        attention_mask,
        piece_ids: piece_ids.to_vec(),
        emb_drop,
        layers,
    })
}

fn layer_forward<T: Scalar>(
    lp: &LayerParams<T>,
    input: Vec<T>,
    attention_mask: &[bool],
    heads: usize,
    draw_mask: &mut impl FnMut(usize) -> Option<Vec<T>>,
) -> (LayerCache<T>, Vec<T>) {
    let h = lp.query.weight.rows();
    let len = input.len() / h;
    let d = h / heads;
    let scale = T::from_f64(1.0 / libm::sqrt(d as f64));

    let q = linear(&input, &lp.query.weight, &lp.query.bias, len);
    let k = linear(&input, &lp.key.weight, &lp.key.bias, len);
    let v = linear(&input, &lp.value.weight, &lp.value.bias, len);

    let mut probs = vec![T::zero(); heads * len * len];
    let mut ctx = vec![T::zero(); len * h];
    for hd in 0..heads {
        let off = hd * d;
        for i in 0..len {
            let row = &mut probs[(hd * len + i) * len..(hd * len + i + 1) * len];
            let qi = &q[i * h + off..i * h + off + d];
            for j in 0..len {
                row[j] = if attention_mask[j] {
                    dot(qi, &k[j * h + off..j * h + off + d]) * scale
                } else {
                    T::neg_infinity()
                };
            }
            softmax_in_place(row);
            let crow = &mut ctx[i * h + off..i * h + off + d];
            for j in 0..len {
                if row[j] != T::zero() {
                    axpy(crow, row[j], &v[j * h + off..j * h + off + d]);
                }
            }
        }
    }

    let mut attn = linear(&ctx, &lp.output.weight, &lp.output.bias, len);
    let attn_drop = draw_mask(len * h);
    apply_mask(&mut attn, &attn_drop);
    let mut r1 = attn;
    axpy(&mut r1, T::one(), &input);
    let (h1, norm1_xhat, norm1_inv) = layer_norm(
        &r1,
        &lp.attention_norm.scale.data,
        &lp.attention_norm.shift.data,
        h,
    );

    let ffn_pre = linear(&h1, &lp.ffn_in.weight, &lp.ffn_in.bias, len);
    let ffn_act: Vec<T> = ffn_pre.iter().map(|&x| gelu(x)).collect();
    let mut f = linear(&ffn_act, &lp.ffn_out.weight, &lp.ffn_out.bias, len);
    let ffn_drop = draw_mask(len * h);
    apply_mask(&mut f, &ffn_drop);
    let mut r2 = f;
    axpy(&mut r2, T::one(), &h1);
    let (out, norm2_xhat, norm2_inv) =
        layer_norm(&r2, &lp.ffn_norm.scale.data, &lp.ffn_norm.shift.data, h);

    let cache = LayerCache {
        input,
        q,
        k,
        v,
        probs,
        ctx,
        attn_drop,
        norm1_xhat,
        norm1_inv,
        h1,
        ffn_pre,
        ffn_act,
        ffn_drop,
        norm2_xhat,
        norm2_inv,
    };
    (cache, out)
}

fn linear_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    weight: &Tensor<T>,
    dweight: &mut Tensor<T>,
    dbias: &mut Tensor<T>,
    rows: usize,
) -> Vec<T> {
    let (k, n) = (weight.rows(), weight.cols());
    matmul_tn_acc(&mut dweight.data, x, dy, rows, k, n);
    col_sum_acc(&mut dbias.data, dy);
    let mut dx = vec![T::zero(); rows * k];
    matmul_nt_acc(&mut dx, dy, &weight.data, rows, k, n);
    dx
}

fn layer_backward<T: Scalar>(
    lp: &LayerParams<T>,
    g: &mut LayerParams<T>,
    c: &LayerCache<T>,
    dout: &[T],
    attention_mask: &[bool],
    heads: usize,
) -> Vec<T> {
    let h = lp.query.weight.rows();
    let len = dout.len() / h;
    let d = h / heads;
    let scale = T::from_f64(1.0 / libm::sqrt(d as f64));

    let dr2 = layer_norm_backward(
        dout,
        &c.norm2_xhat,
        &c.norm2_inv,
        &lp.ffn_norm.scale.data,
        &mut g.ffn_norm.scale.data,
        &mut g.ffn_norm.shift.data,
        h,
    );
    let mut dh1 = dr2.clone();
    let mut df = dr2;
    apply_mask(&mut df, &c.ffn_drop);
    let mut dact = linear_backward(
        &c.ffn_act,
        &df,
        &lp.ffn_out.weight,
        &mut g.ffn_out.weight,
        &mut g.ffn_out.bias,
        len,
    );
    for (da, &x) in dact.iter_mut().zip(&c.ffn_pre) {
        *da *= gelu_grad(x);
    }
    let dh1_ffn = linear_backward(
        &c.h1,
        &dact,
        &lp.ffn_in.weight,
        &mut g.ffn_in.weight,
        &mut g.ffn_in.bias,
        len,
    );
    axpy(&mut dh1, T::one(), &dh1_ffn);

    let dr1 = layer_norm_backward(
        &dh1,
        &c.norm1_xhat,
        &c.norm1_inv,
        &lp.attention_norm.scale.data,
        &mut g.attention_norm.scale.data,
        &mut g.attention_norm.shift.data,
        h,
    );
    let mut dinput = dr1.clone();
    let mut dattn = dr1;
    apply_mask(&mut dattn, &c.attn_drop);
    let dctx = linear_backward(
        &c.ctx,
        &dattn,
        &lp.output.weight,
        &mut g.output.weight,
        &mut g.output.bias,
        len,
    );

    let mut dq = vec![T::zero(); len * h];
    let mut dk = vec![T::zero(); len * h];
    let mut dv = vec![T::zero(); len * h];
    let mut dp = vec![T::zero(); len];
    for hd in 0..heads {
        let off = hd * d;
        for i in 0..len {
            let p = &c.probs[(hd * len + i) * len..(hd * len + i + 1) * len];
            let dci = &dctx[i * h + off..i * h + off + d];
            let mut weighted = T::zero();
            for j in 0..len {
                if !attention_mask[j] {
                    dp[j] = T::zero();
                    continue;
                }
                dp[j] = dot(dci, &c.v[j * h + off..j * h + off + d]);
                weighted += dp[j] * p[j];
                axpy(&mut dv[j * h + off..j * h + off + d], p[j], dci);
            }
            let qi = &c.q[i * h + off..i * h + off + d];
            for j in 0..len {
                if !attention_mask[j] {
                    continue;
                }
                let ds = p[j] * (dp[j] - weighted) * scale;
                if ds == T::zero() {
                    continue;
                }
                axpy(&mut dq[i * h + off..i * h + off + d], ds, &c.k[j * h + off..j * h + off + d]);
                axpy(&mut dk[j * h + off..j * h + off + d], ds, qi);
            }
        }
    }

    for (dy, lin, glin) in [
        (&dq, &lp.query, &mut g.query),
        (&dk, &lp.key, &mut g.key),
        (&dv, &lp.value, &mut g.value),
    ] {
        let dx = linear_backward(&c.input, dy, &lin.weight, &mut glin.weight, &mut glin.bias, len);
        axpy(&mut dinput, T::one(), &dx);
    }
    dinput
}

/// Backpropagates `dout` (gradient w.r.t. the contextual vectors) through
/// the encoder into `grads`.
fn backward<T: Scalar>(
    params: &ModelParams<T>,
    out: &EncoderOutput<T>,
    dout: Vec<T>,
    grads: &mut GradientSet<T>,
) {
    let h = params.config.hidden_dim;
    let heads = params.config.num_heads;
    let mut dx = dout;
    for ((lp, g), c) in params
        .layers
        .iter()
        .zip(grads.0.layers.iter_mut())
        .zip(&out.layers)
        .rev()
    {
        dx = layer_backward(lp, g, c, &dx, &out.attention_mask, heads);
    }
    apply_mask(&mut dx, &out.emb_drop);
    for (t, &id) in out.piece_ids.iter().enumerate() {
        let row = &dx[t * h..(t + 1) * h];
        let tok = id as usize * h;
        axpy(&mut grads.0.token_embeddings.data[tok..tok + h], T::one(), row);
        axpy(&mut grads.0.position_embeddings.data[t * h..(t + 1) * h], T::one(), row);
    }
}

/// Output head selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    Mlm,
    Tag,
}

fn head_logits<T: Scalar>(params: &ModelParams<T>, head: Head, x: &[T]) -> Vec<T> {
    match head {
        Head::Mlm => {
            let mut out = params.mlm_bias.data.clone();
            let v = params.config.vocab_size;
            for (hi, &xv) in x.iter().enumerate() {
                axpy(&mut out, xv, &params.mlm_weight.data[hi * v..(hi + 1) * v]);
            }
            out
        }
        Head::Tag => (0..params.config.num_tags)
            .map(|y| dot(params.tag_weight.row(y), x) + params.tag_bias.data[y])
            .collect(),
    }
}

fn log_probs<T: Scalar>(params: &ModelParams<T>, output: &EncoderOutput<T>, head: Head) -> Tensor<T> {
    let n = match head {
        Head::Mlm => params.config.vocab_size,
        Head::Tag => params.config.num_tags,
    };
    let len = output.len();
    let mut data = Vec::with_capacity(len * n);
    for t in 0..len {
        let mut row = head_logits(params, head, output.contextual.row(t));
        log_softmax_in_place(&mut row);
        data.extend(row);
    }
    Tensor {
        shape: vec![len, n],
        data,
    }
}

/// Position-wise tag log-probabilities `β_y·x_t + b_y − log Σ_y' exp(β_y'·x_t + b_y')`.
pub fn tag_log_probs<T: Scalar>(params: &ModelParams<T>, output: &EncoderOutput<T>) -> Tensor<T> {
    log_probs(params, output, Head::Tag)
}

/// Position-wise log-probabilities over the subword vocabulary.
pub fn mlm_log_probs<T: Scalar>(params: &ModelParams<T>, output: &EncoderOutput<T>) -> Tensor<T> {
    log_probs(params, output, Head::Mlm)
}

/// One training sequence with per-piece targets; `None` marks an ignored position.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub piece_ids: &'a [u32],
    pub targets: &'a [Option<u32>],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossOptions {
    pub head: Head,
    /// Enables dropout.
    pub train_mode: bool,
    /// Skips backpropagation into the encoder; only head gradients are
    /// produced and encoder gradients stay zero.
    pub freeze_encoder: bool,
}

impl LossOptions {
    pub fn new(head: Head) -> Self {
        Self {
            head,
            train_mode: true,
            freeze_encoder: false,
        }
    }
}

/// Mean negative log-likelihood over all non-ignored positions of the batch,
/// with gradients for every parameter tensor.
pub fn loss_and_gradients<T: Scalar>(
    params: &ModelParams<T>,
    batch: &[Example<'_>],
    options: LossOptions,
    rng: &mut Rng,
) -> Result<(f64, GradientSet<T>)> {
    for ex in batch {
        if ex.targets.len() != ex.piece_ids.len() {
            return Err(Error::TargetMisaligned {
                pieces: ex.piece_ids.len(),
                targets: ex.targets.len(),
            });
        }
    }
    let n_targets: usize = batch
        .iter()
        .map(|ex| ex.targets.iter().filter(|t| t.is_some()).count())
        .sum();
    if n_targets == 0 {
        return Err(Error::NoTargets);
    }
    let classes = match options.head {
        Head::Mlm => params.config.vocab_size,
        Head::Tag => params.config.num_tags,
    };
    if let Some(&bad) = batch
        .iter()
        .flat_map(|ex| ex.targets.iter().flatten())
        .find(|&&t| t as usize >= classes)
    {
        return Err(Error::IdOutOfRange {
            id: bad,
            vocab_size: classes,
        });
    }

    let h = params.config.hidden_dim;
    let inv_n = T::from_f64(1.0 / n_targets as f64);
    let mut grads = GradientSet::zeros_like(params);
    let mut total = 0.0f64;
    let train_encoder = !options.freeze_encoder;

    for ex in batch {
        if ex.targets.iter().all(Option::is_none) {
            continue;
        }
        let out = forward(params, ex.piece_ids, options.train_mode, rng)?;
        let mut dx = vec![T::zero(); out.len() * h];
        for (t, target) in ex.targets.iter().enumerate() {
            let Some(target) = *target else { continue };
            let x = out.contextual.row(t);
            let mut lp = head_logits(params, options.head, x);
            log_softmax_in_place(&mut lp);
            total -= lp[target as usize].as_f64();
            // d(-log p_target)/d logits = softmax - onehot, scaled by 1/N.
            let mut dlogits: Vec<T> = lp.iter().map(|&l| l.exp() * inv_n).collect();
            dlogits[target as usize] -= inv_n;
            let dxt = &mut dx[t * h..(t + 1) * h];
            match options.head {
                Head::Mlm => {
                    let v = params.config.vocab_size;
                    for (hi, &xv) in x.iter().enumerate() {
                        let w = &params.mlm_weight.data[hi * v..(hi + 1) * v];
                        dxt[hi] += dot(w, &dlogits);
                        axpy(&mut grads.0.mlm_weight.data[hi * v..(hi + 1) * v], xv, &dlogits);
                    }
                    axpy(&mut grads.0.mlm_bias.data, T::one(), &dlogits);
                }
                Head::Tag => {
                    for (y, &dl) in dlogits.iter().enumerate() {
                        axpy(dxt, dl, params.tag_weight.row(y));
                        axpy(&mut grads.0.tag_weight.data[y * h..(y + 1) * h], dl, x);
                        grads.0.tag_bias.data[y] += dl;
                    }
                }
            }
        }
        if train_encoder {
            backward(params, &out, dx, &mut grads);
        }
    }
    Ok((total / n_targets as f64, grads))
}

/// Argmax tag id at every position; ties go to the lowest id.
pub fn predict_positions<T: Scalar>(params: &ModelParams<T>, output: &EncoderOutput<T>, head: Head) -> Vec<u32> {
    (0..output.len())
        .map(|t| {
            let logits = head_logits(params, head, output.contextual.row(t));
            let mut best = 0;
            for (i, &l) in logits.iter().enumerate() {
                if l > logits[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect()
}
