use crate::error::TensorError;
use crate::tensor::{gemm, MatRef, Scalar, Tensor};

/// Weight `[out, in]` and bias `[out]` of a fully connected layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T: Scalar = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self, TensorError> {
        match *weight.shape() {
            [out, _] if bias.shape() == [out] => Ok(Self { weight, bias }),
            _ => Err(TensorError::InvalidArgument(format!(
                "dense params need weight [out, in] and bias [out], got {:?} / {:?}",
                weight.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn zeros(in_units: usize, out_units: usize) -> Self {
        Self { weight: Tensor::zeros([out_units, in_units]), bias: Tensor::zeros([out_units]) }
    }

    pub fn in_units(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_units(&self) -> usize {
        self.weight.shape()[0]
    }
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T: Scalar> {
    pub grad_x: Tensor<T>,
    pub grad_weight: Tensor<T>,
    pub grad_bias: Tensor<T>,
}

fn batch<T: Scalar>(x: &Tensor<T>, p: &DenseParams<T>) -> Result<usize, TensorError> {
    match *x.shape() {
        [n, i] if i == p.in_units() => Ok(n),
        _ => Err(TensorError::ShapeMismatch {
            op: "dense",
            expected: vec![x.shape().first().copied().unwrap_or(0), p.in_units()],
            got: x.shape().to_vec(),
        }),
    }
}

/// `x * W^T + b`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, p: &DenseParams<T>) -> Result<Tensor<T>, TensorError> {
    let n = batch(x, p)?;
    let (i, o) = (p.in_units(), p.out_units());
    let mut out = vec![T::zero(); n * o];
    gemm(MatRef::row_major(x.data(), n, i), MatRef::transposed(p.weight.data(), o, i), T::zero(), &mut out);
    for row in out.chunks_mut(o) {
        for (v, &b) in row.iter_mut().zip(p.bias.data()) {
            *v = *v + b;
        }
    }
    Tensor::new([n, o], out)
}

/// Gradients of [`dense_forward`] with respect to input, weight and bias.
pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &DenseParams<T>,
    upstream: &Tensor<T>,
) -> Result<DenseGrads<T>, TensorError> {
    let n = batch(x, p)?;
    let (i, o) = (p.in_units(), p.out_units());
    upstream.ensure_shape("dense_backward", &[n, o])?;
    let up = MatRef::row_major(upstream.data(), n, o);

    let mut grad_x = vec![T::zero(); n * i];
    gemm(up, MatRef::row_major(p.weight.data(), o, i), T::zero(), &mut grad_x);
    let mut grad_w = vec![T::zero(); o * i];
    gemm(MatRef::transposed(upstream.data(), n, o), MatRef::row_major(x.data(), n, i), T::zero(), &mut grad_w);
    let mut grad_b = vec![T::zero(); o];
    for row in upstream.data().chunks(o) {
        for (g, &u) in grad_b.iter_mut().zip(row) {
            *g = *g + u;
        }
    }
    Ok(DenseGrads {
        grad_x: Tensor::new([n, i], grad_x)?,
        grad_weight: Tensor::new([o, i], grad_w)?,
        grad_bias: Tensor::new([o], grad_b)?,
    })
}
