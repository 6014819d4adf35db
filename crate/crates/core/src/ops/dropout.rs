use rand::Rng;

use crate::error::TensorError;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-element multipliers applied by a train-mode dropout (0 or `1/(1-rate)`).
/// `None` for eval mode, where dropout is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T: Scalar>(pub Option<Vec<T>>);

impl<T: Scalar> DropoutMask<T> {
    /// Fraction of elements kept (1.0 in eval mode).
    pub fn kept_fraction(&self) -> f64 {
        match &self.0 {
            None => 1.0,
            Some(m) => m.iter().filter(|&&v| v != T::zero()).count() as f64 / m.len() as f64,
        }
    }
}

/// Inverted dropout: in train mode each element survives with probability
/// `1 - rate` and is scaled by `1 / (1 - rate)`; eval mode is the identity.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, DropoutMask<T>), TensorError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(TensorError::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), DropoutMask(None)));
    }
    let keep = 1.0 - rate;
    let scale = T::lit(1.0 / keep);
    let mask: Vec<T> = (0..x.len()).map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() }).collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::new(x.shape(), data)?, DropoutMask(Some(mask))))
}

pub fn dropout_backward<T: Scalar>(mask: &DropoutMask<T>, upstream: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    match &mask.0 {
        None => Ok(upstream.clone()),
        Some(m) if m.len() == upstream.len() => {
            let data = upstream.data().iter().zip(m).map(|(&g, &k)| g * k).collect();
            Tensor::new(upstream.shape(), data)
        }
        Some(m) => Err(TensorError::ShapeMismatch {
            op: "dropout_backward",
            expected: vec![m.len()],
            got: upstream.shape().to_vec(),
        }),
    }
}
