//! Central finite-difference check of [`loss_and_gradients`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{loss_and_gradients, Example, LossOptions, ModelParams};
use crate::{rng_from_seed, Result};

/// Agreement of one tensor's analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `‖numeric − analytic‖ / max(‖numeric‖, ‖analytic‖)`, or zero when
    /// both norms are below `1e-9`.
    pub relative_error: f64,
}

/// Below this norm a gradient is treated as exactly zero. The attention key
/// bias is one such case: it shifts every score of a query row equally and
/// cancels in the softmax.
pub const ZERO_GRADIENT_NORM: f64 = 1e-9;

fn nudge(params: &mut ModelParams<f64>, tensor: usize, k: usize, delta: f64) {
    let mut i = 0;
    params.for_each_mut(|_, t| {
        if i == tensor {
            t.data[k] += delta;
        }
        i += 1;
    });
}

/// Perturbs every scalar by `±eps` and compares `(L⁺ − L⁻) / 2eps` with the
/// analytic gradient, tensor by tensor. Every loss evaluation uses an RNG
/// seeded with `rng_seed`, so dropout masks are identical throughout.
pub fn gradient_check(
    params: &ModelParams<f64>,
    batch: &[Example<'_>],
    options: LossOptions,
    rng_seed: u64,
    eps: f64,
) -> Result<Vec<TensorCheck>> {
    let loss = |p: &ModelParams<f64>| -> Result<f64> {
        Ok(loss_and_gradients(p, batch, options, &mut rng_from_seed(rng_seed))?.0)
    };
    let (_, grads) = loss_and_gradients(params, batch, options, &mut rng_from_seed(rng_seed))?;
    let mut analytic = Vec::new();
    grads.0.for_each(|name, t| analytic.push((name.to_string(), t.data.clone())));

    let mut probe = params.clone();
    let mut out = Vec::with_capacity(analytic.len());
    for (ti, (name, ana)) in analytic.into_iter().enumerate() {
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for (k, a) in ana.iter().enumerate() {
            nudge(&mut probe, ti, k, eps);
            let plus = loss(&probe)?;
            nudge(&mut probe, ti, k, -2.0 * eps);
            let minus = loss(&probe)?;
            nudge(&mut probe, ti, k, eps);
            let numeric = (plus - minus) / (2.0 * eps);
            diff2 += (numeric - a) * (numeric - a);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        let (analytic_norm, numeric_norm) = (libm::sqrt(a2), libm::sqrt(n2));
        let denom = analytic_norm.max(numeric_norm);
        let relative_error = if denom < ZERO_GRADIENT_NORM {
            0.0
        } else {
            libm::sqrt(diff2) / denom
        };
        out.push(TensorCheck {
            name,
            analytic_norm,
            numeric_norm,
            relative_error,
        });
    }
    Ok(out)
}
