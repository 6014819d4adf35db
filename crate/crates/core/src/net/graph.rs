use rand::Rng;

use super::arch::{ArchConfig, LayerKind, LayerSpec};
use crate::error::NetError;
use crate::ops::{ConvParams, DenseParams};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams<T: Scalar> {
    Conv(ConvParams<T>),
    Dense(DenseParams<T>),
}

impl<T: Scalar> LayerParams<T> {
    fn tensors(&self) -> [&Tensor<T>; 2] {
        match self {
            LayerParams::Conv(p) => [&p.kernel, &p.bias],
            LayerParams::Dense(p) => [&p.weight, &p.bias],
        }
    }

    fn tensors_mut(&mut self) -> [&mut Tensor<T>; 2] {
        match self {
            LayerParams::Conv(p) => [&mut p.kernel, &mut p.bias],
            LayerParams::Dense(p) => [&mut p.weight, &mut p.bias],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layer<T: Scalar> {
    pub spec: LayerSpec,
    pub params: Option<LayerParams<T>>,
}

const TENSOR_SUFFIXES: [&str; 2] = ["weight", "bias"];

/// Ordered layer list plus the parameters it owns, keyed by canonical layer
/// name (`block1_conv1` ... `block5_conv3`, `head_dense1`, `head_dense2`,
/// `head_out`). Parameter tensors are addressed as `<layer>.weight` and
/// `<layer>.bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGraph<T: Scalar = f32> {
    arch: ArchConfig,
    pub(crate) layers: Vec<Layer<T>>,
}

/// Builds the modified VGG16 and draws the head initialization from `rng`.
/// The convolutional base stays at zero until weights are imported.
pub fn build_modified_vgg16<T: Scalar, R: Rng + ?Sized>(
    num_classes: usize,
    input_size: usize,
    rng: &mut R,
) -> Result<NetworkGraph<T>, NetError> {
    let mut g = NetworkGraph::build(ArchConfig::vgg16(num_classes, input_size))?;
    g.init_head(rng);
    Ok(g)
}

fn glorot_fill<T: Scalar, R: Rng + ?Sized>(t: &mut Tensor<T>, fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in t.data_mut() {
        *v = T::lit((2.0 * rng.random::<f64>() - 1.0) * limit);
    }
}

impl<T: Scalar> NetworkGraph<T> {
    /// All-zero parameters; conv layers start trainable.
    pub fn build(arch: ArchConfig) -> Result<Self, NetError> {
        arch.validate()?;
        let layers = arch
            .layer_specs()
            .into_iter()
            .map(|spec| {
                let params = match spec.kind {
                    LayerKind::Conv3x3 { in_channels, out_channels } => {
                        Some(LayerParams::Conv(ConvParams::zeros(in_channels, out_channels)))
                    }
                    LayerKind::Dense { in_units, out_units } => {
                        Some(LayerParams::Dense(DenseParams::zeros(in_units, out_units)))
                    }
                    _ => None,
                };
                Layer { spec, params }
            })
            .collect();
        Ok(Self { arch, layers })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn layer_specs(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().map(|l| &l.spec)
    }

    /// Glorot-uniform dense weights, zero biases.
    pub fn init_head<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in self.layers.iter_mut().filter(|l| !l.spec.is_base()) {
            if let Some(LayerParams::Dense(p)) = &mut layer.params {
                let (i, o) = (p.in_units(), p.out_units());
                glorot_fill(&mut p.weight, i, o, rng);
                p.bias.fill(T::zero());
            }
        }
    }

    /// Glorot-uniform conv kernels (receptive-field fans), zero biases. Used
    /// when no pretrained base is imported.
    pub fn init_base<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in self.layers.iter_mut() {
            if let Some(LayerParams::Conv(p)) = &mut layer.params {
                let (i, o) = (p.in_channels() * 9, p.out_channels() * 9);
                glorot_fill(&mut p.kernel, i, o, rng);
                p.bias.fill(T::zero());
            }
        }
    }

    /// `true` freezes all conv layers and leaves the head trainable;
    /// `false` makes every parameterized layer trainable.
    pub fn set_trainable(&mut self, freeze_base: bool) {
        for layer in &mut self.layers {
            layer.spec.trainable = layer.spec.kind.has_params() && !(freeze_base && layer.spec.is_base());
        }
    }

    pub fn base_frozen(&self) -> bool {
        self.layers.iter().filter(|l| l.spec.is_base()).all(|l| !l.spec.trainable)
    }

    fn count(&self, pred: impl Fn(&LayerSpec) -> bool) -> usize {
        self.layers.iter().filter(|l| pred(&l.spec)).map(|l| l.spec.kind.param_count()).sum()
    }

    pub fn param_count(&self) -> usize {
        self.count(|_| true)
    }

    pub fn base_param_count(&self) -> usize {
        self.count(LayerSpec::is_base)
    }

    pub fn head_param_count(&self) -> usize {
        self.count(|s| !s.is_base())
    }

    pub fn trainable_param_count(&self) -> usize {
        self.count(|s| s.trainable)
    }

    /// Expected input shape for a batch of `n` images.
    pub fn input_shape(&self, n: usize) -> [usize; 4] {
        [n, self.arch.input_channels(), self.arch.input_size, self.arch.input_size]
    }

    /// Every parameter tensor in layer order, weight before bias.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .filter_map(|l| l.params.as_ref().map(|p| (l, p)))
            .flat_map(|(l, p)| {
                TENSOR_SUFFIXES.iter().zip(p.tensors()).map(move |(s, t)| (format!("{}.{s}", l.spec.name), t))
            })
            .collect()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.named_tensors().into_iter().map(|(n, _)| n).collect()
    }

    fn split_name(name: &str) -> Option<(&str, usize)> {
        let (layer, suffix) = name.rsplit_once('.')?;
        Some((layer, TENSOR_SUFFIXES.iter().position(|s| *s == suffix)?))
    }

    fn layer_index(&self, layer: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.spec.name == layer)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<T>> {
        let (layer, slot) = Self::split_name(name)?;
        let params = self.layers[self.layer_index(layer)?].params.as_ref()?;
        Some(params.tensors()[slot])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let (layer, slot) = Self::split_name(name)?;
        let idx = self.layer_index(layer)?;
        let params = self.layers[idx].params.as_mut()?;
        Some(params.tensors_mut().into_iter().nth(slot).expect("two tensors per layer"))
    }

    /// Whether the tensor exists and its layer is currently trainable.
    pub fn is_trainable_tensor(&self, name: &str) -> bool {
        Self::split_name(name)
            .and_then(|(layer, _)| self.layer_index(layer))
            .is_some_and(|i| self.layers[i].spec.trainable)
    }

    /// Whether the tensor belongs to a conv (base) layer.
    pub fn is_base_tensor(&self, name: &str) -> bool {
        Self::split_name(name)
            .and_then(|(layer, _)| self.layer_index(layer))
            .is_some_and(|i| self.layers[i].spec.is_base())
    }

    pub fn layer_params(&self, layer: &str) -> Option<&LayerParams<T>> {
        self.layers[self.layer_index(layer)?].params.as_ref()
    }

    /// Converts every parameter to another element type.
    pub fn cast<U: Scalar>(&self) -> NetworkGraph<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                spec: l.spec.clone(),
                params: l.params.as_ref().map(|p| match p {
                    LayerParams::Conv(c) => {
                        LayerParams::Conv(ConvParams { kernel: c.kernel.cast(), bias: c.bias.cast() })
                    }
                    LayerParams::Dense(d) => {
                        LayerParams::Dense(DenseParams { weight: d.weight.cast(), bias: d.bias.cast() })
                    }
                }),
            })
            .collect();
        NetworkGraph { arch: self.arch.clone(), layers }
    }
}
