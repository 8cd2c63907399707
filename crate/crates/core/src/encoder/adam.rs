use super::{GradientSet, ModelParams, Scalar};
use crate::{Error, Result};

/// Adam with bias correction and optional global-norm gradient clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        Self {
            m: ModelParams::zeros(&params.config),
            v: ModelParams::zeros(&params.config),
            step: 0,
        }
    }
}

impl Adam {
    /// Applies one update. Non-finite gradients abort the step before any
    /// tensor is modified.
    pub fn step<T: Scalar>(
        &self,
        params: &mut ModelParams<T>,
        grads: &GradientSet<T>,
        state: &mut AdamState<T>,
        lr: f64,
    ) -> Result<()> {
        let mut bad = None;
        grads.0.for_each(|name, t| {
            if bad.is_none() && !t.is_finite() {
                bad = Some(alloc::string::String::from(name));
            }
        });
        if let Some(name) = bad {
            return Err(Error::NonFiniteGradient(name));
        }
        let scale = match self.clip_norm {
            Some(clip) => {
                let norm = grads.global_norm();
                if norm > clip { clip / norm } else { 1.0 }
            }
            None => 1.0,
        };
        state.step += 1;
        let t = state.step as i32;
        let coeffs = StepCoeffs {
            beta1: T::from_f64(self.beta1),
            beta2: T::from_f64(self.beta2),
            eps: T::from_f64(self.eps),
            lr: T::from_f64(lr),
            grad_scale: T::from_f64(scale),
            bias1: T::from_f64(1.0 - libm::pow(self.beta1, t as f64)),
            bias2: T::from_f64(1.0 - libm::pow(self.beta2, t as f64)),
        };

        let mut m_tensors = alloc::vec::Vec::new();
        state.m.for_each_mut(|_, t| m_tensors.push(core::mem::take(&mut t.data)));
        let mut v_tensors = alloc::vec::Vec::new();
        state.v.for_each_mut(|_, t| v_tensors.push(core::mem::take(&mut t.data)));
        let mut i = 0;
        let result = params.zip_mut(&grads.0, |_, p, g| {
            update_slice(&mut p.data, &g.data, &mut m_tensors[i], &mut v_tensors[i], &coeffs);
            i += 1;
        });
        let mut i = 0;
        state.m.for_each_mut(|_, t| {
            t.data = core::mem::take(&mut m_tensors[i]);
            i += 1;
        });
        let mut i = 0;
        state.v.for_each_mut(|_, t| {
            t.data = core::mem::take(&mut v_tensors[i]);
            i += 1;
        });
        result
    }
}

pub(crate) struct StepCoeffs<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub lr: T,
    pub grad_scale: T,
    pub bias1: T,
    pub bias2: T,
}

pub(crate) fn update_slice<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    c: &StepCoeffs<T>,
) {
    let one = T::one();
    for ((p, &g), (m, v)) in param.iter_mut().zip(grad).zip(m.iter_mut().zip(v.iter_mut())) {
        let g = g * c.grad_scale;
        *m = c.beta1 * *m + (one - c.beta1) * g;
        *v = c.beta2 * *v + (one - c.beta2) * g * g;
        let m_hat = *m / c.bias1;
        let v_hat = *v / c.bias2;
        *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
}
