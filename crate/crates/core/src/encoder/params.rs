use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use super::{EncoderConfig, Scalar};
use crate::{rng_from_seed, Error, Result};

const INIT_STD: f64 = 0.02;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::from_f64(x.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `y = x W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[input, output]),
            bias: Tensor::zeros(&[output]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub scale: Tensor<T>,
    pub shift: Tensor<T>,
}

impl<T: Scalar> LayerNorm<T> {
    fn zeros(dim: usize) -> Self {
        Self {
            scale: Tensor::zeros(&[dim]),
            shift: Tensor::zeros(&[dim]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub output: Linear<T>,
    pub attention_norm: LayerNorm<T>,
    pub ffn_in: Linear<T>,
    pub ffn_out: Linear<T>,
    pub ffn_norm: LayerNorm<T>,
}

/// Every tensor of the encoder and both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: EncoderConfig,
    /// `vocab_size × hidden_dim`
    pub token_embeddings: Tensor<T>,
    /// `max_len × hidden_dim`
    pub position_embeddings: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    /// `hidden_dim × vocab_size`
    pub mlm_weight: Tensor<T>,
    pub mlm_bias: Tensor<T>,
    /// `num_tags × hidden_dim`; row `y` is the weight vector of tag `y`.
    pub tag_weight: Tensor<T>,
    pub tag_bias: Tensor<T>,
}

/// Gradients with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T>(pub ModelParams<T>);

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        Self(ModelParams::zeros(&params.config))
    }

    pub fn global_norm(&self) -> f64 {
        let mut sum = 0.0;
        self.0.for_each(|_, t| {
            sum += t.data.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>();
        });
        libm::sqrt(sum)
    }

    pub fn scale(&mut self, factor: T) {
        self.0.for_each_mut(|_, t| t.data.iter_mut().for_each(|x| *x *= factor));
    }

    /// Adds `other` into `self` tensor by tensor.
    pub fn accumulate(&mut self, other: &GradientSet<T>) -> Result<()> {
        self.0.zip_mut(&other.0, |_, a, b| {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += *y)
        })
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &EncoderConfig) -> Self {
        let h = config.hidden_dim;
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                query: Linear::zeros(h, h),
                key: Linear::zeros(h, h),
                value: Linear::zeros(h, h),
                output: Linear::zeros(h, h),
                attention_norm: LayerNorm::zeros(h),
                ffn_in: Linear::zeros(h, config.ffn_dim),
                ffn_out: Linear::zeros(config.ffn_dim, h),
                ffn_norm: LayerNorm::zeros(h),
            })
            .collect();
        Self {
            config: config.clone(),
            token_embeddings: Tensor::zeros(&[config.vocab_size, h]),
            position_embeddings: Tensor::zeros(&[config.max_len, h]),
            layers,
            mlm_weight: Tensor::zeros(&[h, config.vocab_size]),
            mlm_bias: Tensor::zeros(&[config.vocab_size]),
            tag_weight: Tensor::zeros(&[config.num_tags, h]),
            tag_bias: Tensor::zeros(&[config.num_tags]),
        }
    }

    pub(crate) fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        p.for_each_mut(|name, t| {
            if is_weight(name) {
                t.data
                    .iter_mut()
                    .for_each(|x| *x = T::from_f64(normal.sample(&mut rng)));
            } else if name.ends_with(".scale") {
                t.data.iter_mut().for_each(|x| *x = T::one());
            }
        });
        Ok(p)
    }

    /// Visits every tensor in a fixed order with its dotted name.
    pub fn for_each<'a>(&'a self, mut f: impl FnMut(&str, &'a Tensor<T>)) {
        f("embeddings.token", &self.token_embeddings);
        f("embeddings.position", &self.position_embeddings);
        for (i, l) in self.layers.iter().enumerate() {
            for (name, t) in l.named(i) {
                f(&name, t);
            }
        }
        f("mlm_head.weight", &self.mlm_weight);
        f("mlm_head.bias", &self.mlm_bias);
        f("tag_head.weight", &self.tag_weight);
        f("tag_head.bias", &self.tag_bias);
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor<T>)) {
        f("embeddings.token", &mut self.token_embeddings);
        f("embeddings.position", &mut self.position_embeddings);
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (name, t) in l.named_mut(i) {
                f(&name, t);
            }
        }
        f("mlm_head.weight", &mut self.mlm_weight);
        f("mlm_head.bias", &mut self.mlm_bias);
        f("tag_head.weight", &mut self.tag_weight);
        f("tag_head.bias", &mut self.tag_bias);
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.for_each(|n, _| names.push(String::from(n)));
        names
    }

    /// Pairs each tensor of `self` with the same-named tensor of `other`.
    pub fn zip_mut(
        &mut self,
        other: &ModelParams<T>,
        mut f: impl FnMut(&str, &mut Tensor<T>, &Tensor<T>),
    ) -> Result<()> {
        let mut theirs = Vec::new();
        other.for_each(|_, t| theirs.push(t));
        let mut i = 0;
        let mut ok = true;
        self.for_each_mut(|name, t| {
            match theirs.get(i) {
                Some(o) if o.shape == t.shape => f(name, t, o),
                _ => ok = false,
            }
            i += 1;
        });
        if ok && i == theirs.len() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch)
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(&self.config);
        let mut src = Vec::new();
        self.for_each(|_, t| src.push(t.cast::<U>()));
        let mut i = 0;
        out.for_each_mut(|_, t| {
            *t = src[i].clone();
            i += 1;
        });
        out
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|_, t| ok &= t.is_finite());
        ok
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, t| n += t.len());
        n
    }

    /// Whether a tensor belongs to the encoder body rather than a head.
    pub fn is_encoder_tensor(name: &str) -> bool {
        !(name.starts_with("mlm_head") || name.starts_with("tag_head"))
    }
}

fn is_weight(name: &str) -> bool {
    name.starts_with("embeddings") || name.ends_with(".weight")
}

impl<T> LayerParams<T> {
    fn named(&self, i: usize) -> [(String, &Tensor<T>); 16] {
        let n = |s: &str| format!("layers.{i}.{s}");
        [
            (n("attention.query.weight"), &self.query.weight),
            (n("attention.query.bias"), &self.query.bias),
            (n("attention.key.weight"), &self.key.weight),
            (n("attention.key.bias"), &self.key.bias),
            (n("attention.value.weight"), &self.value.weight),
            (n("attention.value.bias"), &self.value.bias),
            (n("attention.output.weight"), &self.output.weight),
            (n("attention.output.bias"), &self.output.bias),
            (n("attention_norm.scale"), &self.attention_norm.scale),
            (n("attention_norm.shift"), &self.attention_norm.shift),
            (n("ffn.in.weight"), &self.ffn_in.weight),
            (n("ffn.in.bias"), &self.ffn_in.bias),
            (n("ffn.out.weight"), &self.ffn_out.weight),
            (n("ffn.out.bias"), &self.ffn_out.bias),
            (n("ffn_norm.scale"), &self.ffn_norm.scale),
            (n("ffn_norm.shift"), &self.ffn_norm.shift),
        ]
    }

    fn named_mut(&mut self, i: usize) -> [(String, &mut Tensor<T>); 16] {
        let n = |s: &str| format!("layers.{i}.{s}");
        [
            (n("attention.query.weight"), &mut self.query.weight),
            (n("attention.query.bias"), &mut self.query.bias),
            (n("attention.key.weight"), &mut self.key.weight),
            (n("attention.key.bias"), &mut self.key.bias),
            (n("attention.value.weight"), &mut self.value.weight),
            (n("attention.value.bias"), &mut self.value.bias),
            (n("attention.output.weight"), &mut self.output.weight),
            (n("attention.output.bias"), &mut self.output.bias),
            (n("attention_norm.scale"), &mut self.attention_norm.scale),
            (n("attention_norm.shift"), &mut self.attention_norm.shift),
            (n("ffn.in.weight"), &mut self.ffn_in.weight),
            (n("ffn.in.bias"), &mut self.ffn_in.bias),
            (n("ffn.out.weight"), &mut self.ffn_out.weight),
            (n("ffn.out.bias"), &mut self.ffn_out.bias),
            (n("ffn_norm.scale"), &mut self.ffn_norm.scale),
            (n("ffn_norm.shift"), &mut self.ffn_norm.shift),
        ]
    }
}
