use crate::error::TensorError;
use crate::tensor::{Scalar, Tensor};

/// Argmax positions recorded by [`maxpool2x2_forward`], as flat indices into
/// the pooled input.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolIndices {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn output_shape(&self) -> Vec<usize> {
        let s = &self.input_shape;
        vec![s[0], s[1], s[2] / 2, s[3] / 2]
    }
}

/// Non-overlapping 2x2 max pooling with stride 2. Odd trailing rows and
/// columns are dropped; ties go to the first element in row-major window order.
pub fn maxpool2x2_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices), TensorError> {
    let [n, c, h, w] = match *x.shape() {
        [n, c, h, w] => [n, c, h, w],
        _ => return Err(TensorError::InvalidArgument(format!("maxpool expects [n, c, h, w], got {:?}", x.shape()))),
    };
    if h < 2 || w < 2 {
        return Err(TensorError::InvalidArgument(format!("maxpool needs spatial dims >= 2, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let data = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let mut best = top;
                for cand in [top + 1, top + w, top + w + 1] {
                    if data[cand] > data[best] {
                        best = cand;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    let pooled = Tensor::new([n, c, oh, ow], out)?;
    Ok((pooled, PoolIndices { input_shape: x.shape().to_vec(), argmax }))
}

/// Scatters `upstream` onto the recorded argmax positions.
pub fn maxpool2x2_backward<T: Scalar>(indices: &PoolIndices, upstream: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    upstream.ensure_shape("maxpool2x2_backward", &indices.output_shape())?;
    let mut grad = Tensor::zeros(indices.input_shape.clone());
    let g = grad.data_mut();
    for (&pos, &u) in indices.argmax.iter().zip(upstream.data()) {
        g[pos] = g[pos] + u;
    }
    Ok(grad)
}
