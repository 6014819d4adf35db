use crate::error::TensorError;
use crate::tensor::{Scalar, Tensor};

/// Lower clamp applied to predicted probabilities before the log.
pub const PROB_FLOOR: f64 = 1e-7;

fn rows<T: Scalar>(y: &Tensor<T>, yhat: &Tensor<T>, op: &'static str) -> Result<(usize, usize), TensorError> {
    yhat.ensure_shape(op, y.shape())?;
    let (n, c) = match *y.shape() {
        [c] => (1, c),
        [n, c] => (n, c),
        _ => {
            return Err(TensorError::InvalidArgument(format!(
                "{op}: expected [classes] or [batch, classes], got {:?}",
                y.shape()
            )))
        }
    };
    for (i, row) in y.data().chunks(c).enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != c {
            return Err(TensorError::InvalidArgument(format!("{op}: target row {i} is not one-hot")));
        }
    }
    Ok((n, c))
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    p.max(T::lit(PROB_FLOOR)).min(T::one())
}

/// Categorical cross-entropy `-sum_i y_i log(clamp(yhat_i))`, averaged over
/// the batch when the inputs are `[batch, classes]`.
pub fn cross_entropy<T: Scalar>(y: &Tensor<T>, yhat: &Tensor<T>) -> Result<T, TensorError> {
    let (n, _) = rows(y, yhat, "cross_entropy")?;
    let total: T =
        y.data().iter().zip(yhat.data()).filter(|(&t, _)| t != T::zero()).map(|(&t, &p)| -t * clamp_prob(p).ln()).sum();
    Ok(total / T::lit(n as f64))
}

/// Gradient of [`cross_entropy`] with respect to `yhat` (zero where the clamp is active).
pub fn cross_entropy_backward<T: Scalar>(y: &Tensor<T>, yhat: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (n, _) = rows(y, yhat, "cross_entropy_backward")?;
    let scale = T::lit(n as f64);
    let floor = T::lit(PROB_FLOOR);
    let data = y
        .data()
        .iter()
        .zip(yhat.data())
        .map(|(&t, &p)| if t == T::zero() || p < floor || p > T::one() { T::zero() } else { -t / p / scale })
        .collect();
    Tensor::new(y.shape(), data)
}

/// Gradient of the mean cross-entropy with respect to the logits feeding a
/// softmax: `(p - y) / batch`. Matches the clamped loss whenever the true
/// class probability is at least [`PROB_FLOOR`].
pub fn softmax_cross_entropy_grad<T: Scalar>(y: &Tensor<T>, probs: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (n, _) = rows(y, probs, "softmax_cross_entropy_grad")?;
    let scale = T::lit(n as f64);
    let data = probs.data().iter().zip(y.data()).map(|(&p, &t)| (p - t) / scale).collect();
    Tensor::new(y.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::fd::{numeric_grad, rel_err};
    use crate::ops::{softmax, softmax_backward};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn examples() {
        let l = cross_entropy(&t(&[3], &[0.0, 1.0, 0.0]), &t(&[3], &[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(l, 0.0);
        let third = 1.0 / 3.0;
        let l = cross_entropy(&t(&[3], &[1.0, 0.0, 0.0]), &t(&[3], &[third, third, third])).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
        assert!((l - 1.0986).abs() < 1e-4);
        let l = cross_entropy(&t(&[3], &[0.0, 0.0, 1.0]), &t(&[3], &[0.2, 0.3, 0.5])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_wrong_prediction_is_clamped() {
        let l = cross_entropy(&t(&[2], &[1.0, 0.0]), &t(&[2], &[0.0, 1.0])).unwrap();
        assert!((l + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn batch_is_mean() {
        let y = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let p = t(&[2, 2], &[0.5, 0.5, 0.25, 0.75]);
        let l = cross_entropy(&y, &p).unwrap();
        assert!((l - (-(0.5f64.ln()) - 0.75f64.ln()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(cross_entropy(&t(&[3], &[1.0, 0.0, 0.0]), &t(&[2], &[0.5, 0.5])).is_err());
        assert!(cross_entropy(&t(&[2], &[0.5, 0.5]), &t(&[2], &[0.5, 0.5])).is_err());
        assert!(cross_entropy(&t(&[2], &[1.0, 1.0]), &t(&[2], &[0.5, 0.5])).is_err());
    }

    #[test]
    fn fused_gradient_matches_chained_softmax_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let logits: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = t(&[3, 3], &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let p = softmax(&t(&[3, 3], &logits)).unwrap();
        let fused = softmax_cross_entropy_grad(&y, &p).unwrap();
        let chained = softmax_backward(&p, &cross_entropy_backward(&y, &p).unwrap()).unwrap();
        assert!(fused.max_abs_diff(&chained) < 1e-12);
        let numeric = numeric_grad(&logits, 1e-6, |v| cross_entropy(&y, &softmax(&t(&[3, 3], v)).unwrap()).unwrap());
        for (a, n) in fused.data().iter().zip(&numeric) {
            assert!(rel_err(*a, *n) <= 1e-5, "{a} vs {n}");
        }
    }
}
