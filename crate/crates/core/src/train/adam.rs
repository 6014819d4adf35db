use indexmap::IndexMap;

use super::HyperParams;
use crate::error::TrainError;
use crate::net::{Gradients, NetworkGraph};
use crate::tensor::{Scalar, Tensor};

/// First/second moment estimates per trainable tensor plus the step count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState<T: Scalar> {
    pub m: IndexMap<String, Tensor<T>>,
    pub v: IndexMap<String, Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new() -> Self {
        Self { m: IndexMap::new(), v: IndexMap::new(), t: 0 }
    }
}

/// Bias-corrected Adam update of one tensor at (already incremented) step `t`.
pub fn adam_update<T: Scalar>(param: &mut [T], grad: &[T], m: &mut [T], v: &mut [T], t: u64, hp: &HyperParams) {
    assert!(param.len() == grad.len() && m.len() == grad.len() && v.len() == grad.len());
    let (b1, b2) = (T::lit(hp.beta1), T::lit(hp.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - hp.beta1), T::lit(1.0 - hp.beta2));
    let corr1 = T::lit(1.0 - hp.beta1.powf(t as f64));
    let corr2 = T::lit(1.0 - hp.beta2.powf(t as f64));
    let (lr, eps) = (T::lit(hp.learning_rate), T::lit(hp.epsilon));
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + one_b1 * g;
        v[i] = b2 * v[i] + one_b2 * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        param[i] = param[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One Adam step over every trainable tensor of `graph`. `grads` must hold
/// exactly the trainable tensors, with matching shapes.
pub fn adam_step<T: Scalar>(
    graph: &mut NetworkGraph<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    hp: &HyperParams,
) -> Result<(), TrainError> {
    let trainable: Vec<String> = graph.tensor_names().into_iter().filter(|n| graph.is_trainable_tensor(n)).collect();
    if trainable.len() != grads.len() {
        let missing = trainable.iter().find(|n| grads.get(n).is_none()).cloned();
        let extra = grads.iter().map(|(n, _)| n).find(|n| !trainable.contains(n)).cloned();
        return Err(TrainError::GradientMismatch(missing.or(extra).unwrap_or_default()));
    }
    for name in &trainable {
        let g = grads.get(name).ok_or_else(|| TrainError::GradientMismatch(name.clone()))?;
        let shape = graph.tensor(name).expect("listed tensor").shape().to_vec();
        if g.shape() != shape.as_slice() {
            return Err(TrainError::GradientMismatch(name.clone()));
        }
    }
    state.t += 1;
    for name in trainable {
        let g = grads.get(&name).expect("validated");
        let param = graph.tensor_mut(&name).expect("validated");
        let m = state.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.shape()));
        let v = state.v.entry(name).or_insert_with(|| Tensor::zeros(g.shape()));
        adam_update(param.data_mut(), g.data(), m.data_mut(), v.data_mut(), state.t, hp);
    }
    Ok(())
}
