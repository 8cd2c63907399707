//! Miniature post-layer-norm transformer encoder with masked-LM and tag heads.
//!
//! Forward and backward passes are written out by hand. All arithmetic is
//! generic over [`Scalar`], so the same code trains in `f32` and is checked
//! against finite differences in `f64`.

mod adam;
pub mod gradcheck;
mod model;
mod ops;
mod params;

pub use adam::{Adam, AdamState};
pub use model::{
    forward, loss_and_gradients, mlm_log_probs, predict_positions, tag_log_probs, EncoderOutput,
    Example, Head, LossOptions,
};
pub use params::{GradientSet, LayerParams, LayerNorm, Linear, ModelParams, Tensor};

use alloc::string::String;
use core::fmt::Debug;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use crate::{Error, Result};

/// Floating-point element type of model tensors.
pub trait Scalar:
    num_traits::Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub num_tags: usize,
    pub dropout_rate: f64,
}

impl EncoderConfig {
    /// Two layers, hidden 64, four heads, FFN 128, max_len 64, dropout 0.1.
    pub fn desk_scale(vocab_size: usize, num_tags: usize) -> Self {
        Self {
            num_layers: 2,
            hidden_dim: 64,
            num_heads: 4,
            ffn_dim: 128,
            vocab_size,
            max_len: 64,
            num_tags,
            dropout_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_layers", self.num_layers),
            ("hidden_dim", self.hidden_dim),
            ("num_heads", self.num_heads),
            ("ffn_dim", self.ffn_dim),
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
            ("num_tags", self.num_tags),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(alloc::format!("{name} must be at least 1")));
        }
        if !self.hidden_dim.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidConfig(alloc::format!(
                "hidden_dim {} is not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(alloc::format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }

    pub fn describe(&self) -> String {
        alloc::format!(
            "layers={} hidden={} heads={} ffn={} vocab={} max_len={} tags={} dropout={}",
            self.num_layers,
            self.hidden_dim,
            self.num_heads,
            self.ffn_dim,
            self.vocab_size,
            self.max_len,
            self.num_tags,
            self.dropout_rate
        )
    }
}

/// Draws every weight from N(0, 0.02²); biases and layer-norm shifts start at
/// zero and layer-norm scales at one.
pub fn init_params<T: Scalar>(config: &EncoderConfig, seed: u64) -> Result<ModelParams<T>> {
    ModelParams::init(config, seed)
}
