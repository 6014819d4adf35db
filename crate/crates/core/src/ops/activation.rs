use crate::error::TensorError;
use crate::tensor::{Scalar, Tensor};

/// Elementwise `max(0, x)`.
pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `upstream` where `x > 0`; the derivative at exactly zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    upstream.ensure_shape("relu_backward", x.shape())?;
    let data =
        x.data().iter().zip(upstream.data()).map(|(&xv, &g)| if xv > T::zero() { g } else { T::zero() }).collect();
    Tensor::new(x.shape(), data)
}

fn last_axis(x_shape: &[usize]) -> usize {
    x_shape.last().copied().unwrap_or(1)
}

/// Softmax over the last axis, computed with max-subtraction.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    x.ensure_finite("softmax input")?;
    let width = last_axis(x.shape());
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(width) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total = total + *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of softmax given its output `probs`:
/// `dx = p * (g - sum(g * p))` per slice.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    upstream.ensure_shape("softmax_backward", probs.shape())?;
    let width = last_axis(probs.shape());
    let mut out = Vec::with_capacity(probs.len());
    for (p, g) in probs.data().chunks(width).zip(upstream.data().chunks(width)) {
        let inner: T = p.iter().zip(g).map(|(&pi, &gi)| pi * gi).sum();
        out.extend(p.iter().zip(g).map(|(&pi, &gi)| pi * (gi - inner)));
    }
    Tensor::new(probs.shape(), out)
}
