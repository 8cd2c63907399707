//! Dense kernels over row-major slices.
//!
//! Inner loops are written as `out[j] += a * b[j]` so they vectorize without
//! reassociating floating-point sums; results do not depend on SIMD width.

use alloc::vec;
use alloc::vec::Vec;

use super::Scalar;

/// `out[m×n] += a[m×k] · b[k×n]`
pub fn matmul_acc<T: Scalar>(out: &mut [T], a: &[T], b: &[T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            axpy(orow, av, &b[p * n..(p + 1) * n]);
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · c[m×n]`
pub fn matmul_tn_acc<T: Scalar>(out: &mut [T], a: &[T], c: &[T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let crow = &c[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            axpy(&mut out[p * n..(p + 1) * n], av, crow);
        }
    }
}

/// `out[m×k] += c[m×n] · b[k×n]ᵀ`
pub fn matmul_nt_acc<T: Scalar>(out: &mut [T], c: &[T], b: &[T], m: usize, k: usize, n: usize) {
    let bt = transpose(b, k, n);
    matmul_acc(out, c, &bt, m, n, k);
}

pub fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

#[inline]
pub fn axpy<T: Scalar>(out: &mut [T], a: T, x: &[T]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Adds `bias` to every row.
pub fn add_rows<T: Scalar>(out: &mut [T], bias: &[T]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

/// Accumulates the column sums of `x` into `out`.
pub fn col_sum_acc<T: Scalar>(out: &mut [T], x: &[T]) {
    for row in x.chunks_exact(out.len()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// In-place log-softmax of one row; returns nothing, rows with all entries
/// `-inf` are left untouched.
pub fn log_softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return;
    }
    let mut sum = T::zero();
    for &v in row.iter() {
        sum += (v - max).exp();
    }
    let lse = max + sum.ln();
    for v in row.iter_mut() {
        *v -= lse;
    }
}

pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    log_softmax_in_place(row);
    for v in row.iter_mut() {
        *v = v.exp();
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// Tanh approximation of GELU.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let c = T::from_f64(GELU_C);
    let k = T::from_f64(GELU_K);
    let half = T::from_f64(0.5);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::from_f64(GELU_C);
    let k = T::from_f64(GELU_K);
    let half = T::from_f64(0.5);
    let th = (c * (x + k * x * x * x)).tanh();
    half * (T::one() + th)
        + half * x * (T::one() - th * th) * c * (T::one() + T::from_f64(3.0) * k * x * x)
}

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Row-wise layer normalization. Returns `(y, x̂, 1/σ)`.
pub fn layer_norm<T: Scalar>(
    x: &[T],
    scale: &[T],
    shift: &[T],
    dim: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = x.len() / dim;
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); rows];
    let n = T::from_f64(dim as f64);
    let eps = T::from_f64(LAYER_NORM_EPS);
    for r in 0..rows {
        let row = &x[r * dim..(r + 1) * dim];
        let mean = row.iter().copied().fold(T::zero(), |a, b| a + b) / n;
        let var = row
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .fold(T::zero(), |a, b| a + b)
            / n;
        let inv = T::one() / (var + eps).sqrt();
        inv_std[r] = inv;
        for j in 0..dim {
            let h = (row[j] - mean) * inv;
            xhat[r * dim + j] = h;
            y[r * dim + j] = h * scale[j] + shift[j];
        }
    }
    (y, xhat, inv_std)
}

/// Backward of [`layer_norm`]: accumulates scale/shift gradients and returns
/// the input gradient.
pub fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    xhat: &[T],
    inv_std: &[T],
    scale: &[T],
    dscale: &mut [T],
    dshift: &mut [T],
    dim: usize,
) -> Vec<T> {
    let rows = dy.len() / dim;
    let mut dx = vec![T::zero(); dy.len()];
    let n = T::from_f64(dim as f64);
    let mut dxhat = vec![T::zero(); dim];
    for r in 0..rows {
        let dyr = &dy[r * dim..(r + 1) * dim];
        let xr = &xhat[r * dim..(r + 1) * dim];
        let mut sum_d = T::zero();
        let mut sum_dx = T::zero();
        for j in 0..dim {
            dscale[j] += dyr[j] * xr[j];
            dshift[j] += dyr[j];
            dxhat[j] = dyr[j] * scale[j];
            sum_d += dxhat[j];
            sum_dx += dxhat[j] * xr[j];
        }
        let f = inv_std[r] / n;
        for j in 0..dim {
            dx[r * dim + j] = f * (n * dxhat[j] - sum_d - xr[j] * sum_dx);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a: Vec<f64> = (0..6).map(|x| x as f64 * 0.5 - 1.0).collect(); // 2×3
        let b: Vec<f64> = (0..12).map(|x| (x as f64).sin()).collect(); // 3×4
        let mut c = vec![0.0; 8];
        matmul_acc(&mut c, &a, &b, 2, 3, 4);
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|p| a[i * 3 + p] * b[p * 4 + j]).sum();
                assert!((c[i * 4 + j] - want).abs() < 1e-12);
            }
        }
        // aᵀ·c has shape 3×4
        let mut t = vec![0.0; 12];
        matmul_tn_acc(&mut t, &a, &c, 2, 3, 4);
        for p in 0..3 {
            for j in 0..4 {
                let want: f64 = (0..2).map(|i| a[i * 3 + p] * c[i * 4 + j]).sum();
                assert!((t[p * 4 + j] - want).abs() < 1e-12);
            }
        }
        // c·bᵀ has shape 2×3
        let mut n = vec![0.0; 6];
        matmul_nt_acc(&mut n, &c, &b, 2, 3, 4);
        for i in 0..2 {
            for p in 0..3 {
                let want: f64 = (0..4).map(|j| c[i * 4 + j] * b[p * 4 + j]).sum();
                assert!((n[i * 3 + p] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_softmax_normalizes_and_is_shift_invariant() {
        let mut a = vec![1.0f64, 2.0, -3.0, 0.5];
        let mut b: Vec<f64> = a.iter().map(|x| x + 7.25).collect();
        log_softmax_in_place(&mut a);
        log_softmax_in_place(&mut b);
        let total: f64 = a.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gelu_grad_matches_difference() {
        for &x in &[-3.0f64, -0.7, 0.0, 0.3, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
