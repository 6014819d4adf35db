//! 3x3 convolution, stride 1, padding 1, lowered to GEMM via im2col.

use crate::error::TensorError;
use crate::tensor::{gemm, MatRef, Scalar, Tensor};

const K: usize = 3;
const TAPS: usize = K * K;

/// Kernel `[out, in, 3, 3]` and bias `[out]` of one convolution layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T: Scalar = f32> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>) -> Result<Self, TensorError> {
        match *kernel.shape() {
            [out, _, K, K] if bias.shape() == [out] => Ok(Self { kernel, bias }),
            _ => Err(TensorError::InvalidArgument(format!(
                "conv params need kernel [out, in, 3, 3] and bias [out], got {:?} / {:?}",
                kernel.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self { kernel: Tensor::zeros([out_channels, in_channels, K, K]), bias: Tensor::zeros([out_channels]) }
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T: Scalar> {
    pub grad_x: Tensor<T>,
    pub grad_kernel: Tensor<T>,
    pub grad_bias: Tensor<T>,
}

fn dims<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<[usize; 4], TensorError> {
    match *x.shape() {
        [n, c, h, w] if c == p.in_channels() => Ok([n, c, h, w]),
        [_, c, _, _] => Err(TensorError::ShapeMismatch { op: "conv2d", expected: vec![p.in_channels()], got: vec![c] }),
        _ => Err(TensorError::InvalidArgument(format!("conv2d expects [n, c, h, w] input, got {:?}", x.shape()))),
    }
}

/// Valid output column range `[lo, hi)` for a tap offset along an axis of length `len`.
fn tap_range(tap: usize, len: usize) -> (usize, usize) {
    let lo = 1usize.saturating_sub(tap);
    let hi = (len + 1).saturating_sub(tap).min(len);
    (lo, hi)
}

/// Unfolds one `[c, h, w]` image into a `[c*9, h*w]` patch matrix.
fn im2col<T: Scalar>(img: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &img[ci * hw..(ci + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &mut cols[((ci * TAPS) + ky * K + kx) * hw..][..hw];
                let (x0, x1) = tap_range(kx, w);
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y + ky;
                    if sy < 1 || sy > h || x0 >= x1 {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[(sy - 1) * w..sy * w];
                    dst[..x0].fill(T::zero());
                    dst[x1..].fill(T::zero());
                    dst[x0..x1].copy_from_slice(&src[x0 + kx - 1..x1 + kx - 1]);
                }
            }
        }
    }
}

/// Folds a `[c*9, h*w]` patch-gradient matrix back onto a `[c, h, w]` image gradient.
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, img: &mut [T]) {
    let hw = h * w;
    img.fill(T::zero());
    for ci in 0..c {
        let plane = &mut img[ci * hw..(ci + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &cols[((ci * TAPS) + ky * K + kx) * hw..][..hw];
                let (x0, x1) = tap_range(kx, w);
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let src = &row[y * w + x0..y * w + x1];
                    let dst = &mut plane[(sy - 1) * w + x0 + kx - 1..(sy - 1) * w + x1 + kx - 1];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

/// Cross-correlation with a 3x3 kernel, stride 1 and zero padding 1; spatial
/// size is preserved.
pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>, TensorError> {
    let [n, c, h, w] = dims(x, p)?;
    let co = p.out_channels();
    let hw = h * w;
    let mut cols = vec![T::zero(); c * TAPS * hw];
    let mut out = vec![T::zero(); n * co * hw];
    let kernel = MatRef::row_major(p.kernel.data(), co, c * TAPS);
    for (img, dst) in x.data().chunks(c * hw).zip(out.chunks_mut(co * hw)) {
        im2col(img, c, h, w, &mut cols);
        gemm(kernel, MatRef::row_major(&cols, c * TAPS, hw), T::zero(), dst);
        for (plane, &b) in dst.chunks_mut(hw).zip(p.bias.data()) {
            plane.iter_mut().for_each(|v| *v = *v + b);
        }
    }
    Tensor::new([n, co, h, w], out)
}

/// Optional input gradient, kernel gradient, bias gradient.
type RawGrads<T> = (Option<Tensor<T>>, Tensor<T>, Tensor<T>);

fn backward_impl<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    upstream: &Tensor<T>,
    need_grad_x: bool,
) -> Result<RawGrads<T>, TensorError> {
    let [n, c, h, w] = dims(x, p)?;
    let co = p.out_channels();
    upstream.ensure_shape("conv2d_backward", &[n, co, h, w])?;
    let hw = h * w;
    let taps = c * TAPS;
    let mut cols = vec![T::zero(); taps * hw];
    let mut grad_cols = if need_grad_x { vec![T::zero(); taps * hw] } else { Vec::new() };
    let mut grad_x = if need_grad_x { vec![T::zero(); x.len()] } else { Vec::new() };
    let mut grad_k = vec![T::zero(); co * taps];
    let mut grad_b = vec![T::zero(); co];

    for (i, (img, up)) in x.data().chunks(c * hw).zip(upstream.data().chunks(co * hw)).enumerate() {
        im2col(img, c, h, w, &mut cols);
        // dK += up [co, hw] * cols^T [hw, taps]
        gemm(MatRef::row_major(up, co, hw), MatRef::transposed(&cols, taps, hw), T::one(), &mut grad_k);
        for (gb, plane) in grad_b.iter_mut().zip(up.chunks(hw)) {
            *gb = *gb + plane.iter().copied().sum::<T>();
        }
        if need_grad_x {
            // dcols = K^T [taps, co] * up [co, hw]
            gemm(
                MatRef::transposed(p.kernel.data(), co, taps),
                MatRef::row_major(up, co, hw),
                T::zero(),
                &mut grad_cols,
            );
            col2im(&grad_cols, c, h, w, &mut grad_x[i * c * hw..(i + 1) * c * hw]);
        }
    }
    let grad_x = if need_grad_x { Some(Tensor::new(x.shape(), grad_x)?) } else { None };
    Ok((grad_x, Tensor::new(p.kernel.shape(), grad_k)?, Tensor::new([co], grad_b)?))
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>, TensorError> {
    let (grad_x, grad_kernel, grad_bias) = backward_impl(x, p, upstream, true)?;
    Ok(ConvGrads { grad_x: grad_x.expect("requested"), grad_kernel, grad_bias })
}

/// Parameter gradients only, for a layer whose input needs no gradient.
pub fn conv2d_input_free_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>), TensorError> {
    let (_, k, b) = backward_impl(x, p, upstream, false)?;
    Ok((k, b))
}
