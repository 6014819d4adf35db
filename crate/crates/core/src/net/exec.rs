use indexmap::IndexMap;
use rand::Rng;

use super::arch::LayerKind;
use super::graph::{LayerParams, NetworkGraph};
use super::tape::{GradTape, TapeOp};
use crate::error::{NetError, TensorError};
use crate::ops::{self, Mode};
use crate::tensor::{Scalar, Tensor};

/// Parameter gradients keyed by tensor name (`<layer>.weight` / `<layer>.bias`),
/// in graph order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients<T: Scalar>(pub IndexMap<String, Tensor<T>>);

impl<T: Scalar> Gradients<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.0.iter()
    }
}

fn at_layer(name: &str) -> impl FnOnce(TensorError) -> NetError + '_ {
    move |source| NetError::Layer { layer: name.to_string(), source }
}

impl<T: Scalar> NetworkGraph<T> {
    /// Index of the first layer holding a trainable parameter.
    fn first_grad_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| l.spec.trainable && l.params.is_some())
    }

    /// Runs the network; the result rows are class probabilities.
    pub fn forward<R: Rng + ?Sized>(&self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>, NetError> {
        self.run(x, mode, rng, None)
    }

    /// Like [`forward`](Self::forward), also returning the tape for [`backward`](Self::backward).
    pub fn forward_recorded<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, GradTape<T>), NetError> {
        let mut tape = GradTape::new(self.arch().clone(), mode);
        let out = self.run(x, mode, rng, Some(&mut tape))?;
        Ok((out, tape))
    }

    fn run<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
        mut tape: Option<&mut GradTape<T>>,
    ) -> Result<Tensor<T>, NetError> {
        let n = x.shape().first().copied().unwrap_or(0);
        x.ensure_shape("network input", &self.input_shape(n))?;
        x.ensure_finite("network input")?;
        let first_grad = self.first_grad_layer().unwrap_or(usize::MAX);

        let mut cur = x.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let name = layer.spec.name.as_str();
            let record = tape.is_some() && idx >= first_grad;
            let (next, op) = match (&layer.spec.kind, &layer.params) {
                (LayerKind::Conv3x3 { .. }, Some(LayerParams::Conv(p))) => {
                    let out = ops::conv2d_forward(&cur, p).map_err(at_layer(name))?;
                    out.ensure_finite(name).map_err(at_layer(name))?;
                    (out, record.then_some(TapeOp::Conv { layer: idx, input: cur }))
                }
                (LayerKind::Relu, _) => {
                    let out = ops::relu_forward(&cur);
                    let op = record.then(|| TapeOp::Relu { layer: idx, output: out.clone() });
                    (out, op)
                }
                (LayerKind::MaxPool2x2, _) => {
                    let (out, indices) = ops::maxpool2x2_forward(&cur).map_err(at_layer(name))?;
                    (out, record.then_some(TapeOp::MaxPool { layer: idx, indices }))
                }
                (LayerKind::Flatten, _) => {
                    let input_shape = cur.shape().to_vec();
                    let width = input_shape[1..].iter().product::<usize>();
                    let out = cur.reshape([n, width]).map_err(at_layer(name))?;
                    (out, record.then_some(TapeOp::Flatten { layer: idx, input_shape }))
                }
                (LayerKind::Dense { .. }, Some(LayerParams::Dense(p))) => {
                    let out = ops::dense_forward(&cur, p).map_err(at_layer(name))?;
                    out.ensure_finite(name).map_err(at_layer(name))?;
                    (out, record.then_some(TapeOp::Dense { layer: idx, input: cur }))
                }
                (LayerKind::Dropout { rate }, _) => {
                    let (out, mask) = ops::dropout(&cur, *rate, mode, rng).map_err(at_layer(name))?;
                    (out, record.then_some(TapeOp::Dropout { layer: idx, mask }))
                }
                (LayerKind::Softmax, _) => {
                    let out = ops::softmax(&cur).map_err(at_layer(name))?;
                    let op = record.then(|| TapeOp::Softmax { layer: idx, output: out.clone() });
                    (out, op)
                }
                _ => unreachable!("parameterized layer {name} without parameters"),
            };
            if let Some(t) = tape.as_deref_mut() {
                t.ops.push(op.unwrap_or(TapeOp::NoGrad { layer: idx }));
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Backpropagates `grad_output` (gradient of the loss with respect to the
    /// output probabilities) and returns a gradient for every trainable tensor.
    pub fn backward(&self, tape: &GradTape<T>, grad_output: &Tensor<T>) -> Result<Gradients<T>, NetError> {
        self.backprop(tape, grad_output, false)
    }

    /// Same as [`backward`](Self::backward) but starting from the gradient
    /// with respect to the pre-softmax logits.
    pub fn backward_from_logits(&self, tape: &GradTape<T>, grad_logits: &Tensor<T>) -> Result<Gradients<T>, NetError> {
        self.backprop(tape, grad_logits, true)
    }

    fn check_tape(&self, tape: &GradTape<T>) -> Result<(), NetError> {
        if &tape.arch != self.arch() || tape.ops.len() != self.layers.len() {
            return Err(NetError::TapeMismatch("architecture differs".into()));
        }
        for (i, op) in tape.ops.iter().enumerate() {
            let kind = &self.layers[i].spec.kind;
            let ok = op.layer() == i
                && match op {
                    TapeOp::NoGrad { .. } => true,
                    TapeOp::Conv { .. } => matches!(kind, LayerKind::Conv3x3 { .. }),
                    TapeOp::Relu { .. } => *kind == LayerKind::Relu,
                    TapeOp::MaxPool { .. } => *kind == LayerKind::MaxPool2x2,
                    TapeOp::Flatten { .. } => *kind == LayerKind::Flatten,
                    TapeOp::Dense { .. } => matches!(kind, LayerKind::Dense { .. }),
                    TapeOp::Dropout { .. } => matches!(kind, LayerKind::Dropout { .. }),
                    TapeOp::Softmax { .. } => *kind == LayerKind::Softmax,
                };
            if !ok {
                return Err(NetError::TapeMismatch(format!(
                    "op {i} does not match layer {}",
                    self.layers[i].spec.name
                )));
            }
        }
        Ok(())
    }

    fn backprop(&self, tape: &GradTape<T>, upstream: &Tensor<T>, from_logits: bool) -> Result<Gradients<T>, NetError> {
        self.check_tape(tape)?;
        let first_grad = self.first_grad_layer();
        let mut found: IndexMap<String, Tensor<T>> = IndexMap::new();
        let mut g = upstream.clone();
        let mut ops = tape.reverse().peekable();
        if from_logits {
            if let Some(TapeOp::Softmax { output, .. }) = ops.peek() {
                g.ensure_shape("backward_from_logits", output.shape())?;
                ops.next();
            }
        }

        for op in ops {
            let layer = &self.layers[op.layer()];
            let name = layer.spec.name.as_str();
            g = match op {
                TapeOp::NoGrad { .. } => break,
                TapeOp::Softmax { output, .. } => ops::softmax_backward(output, &g).map_err(at_layer(name))?,
                TapeOp::Dropout { mask, .. } => ops::dropout_backward(mask, &g).map_err(at_layer(name))?,
                TapeOp::Relu { output, .. } => ops::relu_backward(output, &g).map_err(at_layer(name))?,
                TapeOp::Flatten { input_shape, .. } => g.reshape(input_shape.clone()).map_err(at_layer(name))?,
                TapeOp::MaxPool { indices, .. } => ops::maxpool2x2_backward(indices, &g).map_err(at_layer(name))?,
                TapeOp::Dense { input, .. } => {
                    let Some(LayerParams::Dense(p)) = &layer.params else { unreachable!() };
                    let grads = ops::dense_backward(input, p, &g).map_err(at_layer(name))?;
                    if layer.spec.trainable {
                        found.insert(format!("{name}.bias"), grads.grad_bias);
                        found.insert(format!("{name}.weight"), grads.grad_weight);
                    }
                    grads.grad_x
                }
                TapeOp::Conv { layer: idx, input } => {
                    let Some(LayerParams::Conv(p)) = &layer.params else { unreachable!() };
                    if Some(*idx) == first_grad {
                        let (k, b) = ops::conv2d_input_free_backward(input, p, &g).map_err(at_layer(name))?;
                        found.insert(format!("{name}.bias"), b);
                        found.insert(format!("{name}.weight"), k);
                        break;
                    }
                    let grads = ops::conv2d_backward(input, p, &g).map_err(at_layer(name))?;
                    if layer.spec.trainable {
                        found.insert(format!("{name}.bias"), grads.grad_bias);
                        found.insert(format!("{name}.weight"), grads.grad_kernel);
                    }
                    grads.grad_x
                }
            };
        }

        let mut ordered = IndexMap::with_capacity(found.len());
        for name in self.tensor_names() {
            if let Some(t) = found.swap_remove(&name) {
                ordered.insert(name, t);
            }
        }
        Ok(Gradients(ordered))
    }
}
