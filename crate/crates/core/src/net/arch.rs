use serde::{Deserialize, Serialize};

use crate::error::NetError;

/// Number of 3x3 convolutions in each of the five VGG16 blocks.
pub const BLOCK_DEPTHS: [usize; 5] = [2, 2, 3, 3, 3];

const VGG16_WIDTHS: [usize; 5] = [64, 128, 256, 512, 512];
const HEAD_UNITS: [usize; 2] = [1024, 512];
const INPUT_CHANNELS: usize = 3;

/// Shape parameters of the network. [`ArchConfig::vgg16`] is the production
/// topology; smaller widths keep the same layer sequence for fast tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub input_size: usize,
    pub num_classes: usize,
    pub block_widths: [usize; 5],
    pub head_units: [usize; 2],
    pub dropout_rate: f64,
}

impl ArchConfig {
    pub fn vgg16(num_classes: usize, input_size: usize) -> Self {
        Self { input_size, num_classes, block_widths: VGG16_WIDTHS, head_units: HEAD_UNITS, dropout_rate: 0.5 }
    }

    /// Divides every conv and dense width by `divisor` (minimum 1).
    pub fn with_width_divisor(mut self, divisor: usize) -> Self {
        let d = divisor.max(1);
        self.block_widths = self.block_widths.map(|w| (w / d).max(1));
        self.head_units = self.head_units.map(|u| (u / d).max(1));
        self
    }

    /// 32x32 input with all widths divided by 8.
    pub fn shrunken(num_classes: usize) -> Self {
        Self::vgg16(num_classes, 32).with_width_divisor(8)
    }

    pub fn input_channels(&self) -> usize {
        INPUT_CHANNELS
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_size < 32 {
            return Err(NetError::InvalidConfig(format!(
                "input size {} is below 32 and cannot survive five 2x2 poolings",
                self.input_size
            )));
        }
        if self.num_classes < 2 {
            return Err(NetError::InvalidConfig(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        if self.block_widths.iter().chain(&self.head_units).any(|&w| w == 0) {
            return Err(NetError::InvalidConfig("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::InvalidConfig(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    /// Spatial side length after the five floor-halving pools.
    pub fn feature_side(&self) -> usize {
        (0..5).fold(self.input_size, |s, _| s / 2)
    }

    pub fn flatten_width(&self) -> usize {
        let side = self.feature_side();
        side * side * self.block_widths[4]
    }

    /// The full ordered layer list.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut layers = Vec::new();
        let mut channels = INPUT_CHANNELS;
        for (b, (&depth, &width)) in BLOCK_DEPTHS.iter().zip(&self.block_widths).enumerate() {
            for c in 1..=depth {
                let name = format!("block{}_conv{}", b + 1, c);
                layers.push(LayerSpec::new(&name, LayerKind::Conv3x3 { in_channels: channels, out_channels: width }));
                layers.push(LayerSpec::new(&format!("{name}_relu"), LayerKind::Relu));
                channels = width;
            }
            layers.push(LayerSpec::new(&format!("block{}_pool", b + 1), LayerKind::MaxPool2x2));
        }
        layers.push(LayerSpec::new("flatten", LayerKind::Flatten));
        let mut units = self.flatten_width();
        for (i, &out) in self.head_units.iter().enumerate() {
            let name = format!("head_dense{}", i + 1);
            layers.push(LayerSpec::new(&name, LayerKind::Dense { in_units: units, out_units: out }));
            layers.push(LayerSpec::new(&format!("{name}_relu"), LayerKind::Relu));
            layers.push(LayerSpec::new(
                &format!("head_dropout{}", i + 1),
                LayerKind::Dropout { rate: self.dropout_rate },
            ));
            units = out;
        }
        layers.push(LayerSpec::new("head_out", LayerKind::Dense { in_units: units, out_units: self.num_classes }));
        layers.push(LayerSpec::new("head_softmax", LayerKind::Softmax));
        layers
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    /// 3x3 kernel, stride 1, padding 1.
    Conv3x3 {
        in_channels: usize,
        out_channels: usize,
    },
    Relu,
    /// 2x2 window, stride 2.
    MaxPool2x2,
    Flatten,
    Dense {
        in_units: usize,
        out_units: usize,
    },
    Dropout {
        rate: f64,
    },
    Softmax,
}

impl LayerKind {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Conv3x3 { .. } | LayerKind::Dense { .. })
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerKind::Conv3x3 { in_channels, out_channels } => 9 * in_channels * out_channels + out_channels,
            LayerKind::Dense { in_units, out_units } => in_units * out_units + out_units,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub trainable: bool,
}

impl LayerSpec {
    fn new(name: &str, kind: LayerKind) -> Self {
        let trainable = kind.has_params();
        Self { name: name.to_string(), kind, trainable }
    }

    /// Conv layers belong to the pretrained base; everything else to the head.
    pub fn is_base(&self) -> bool {
        matches!(self.kind, LayerKind::Conv3x3 { .. })
    }
}
