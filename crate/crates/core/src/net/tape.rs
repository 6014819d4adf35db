use super::arch::ArchConfig;
use crate::ops::{DropoutMask, Mode, PoolIndices};
use crate::tensor::{Scalar, Tensor};

/// One executed layer and whatever its backward pass needs. `layer` is the
/// index into the graph's layer list.
#[derive(Clone, Debug)]
pub enum TapeOp<T: Scalar> {
    /// Layer upstream of every trainable parameter; backward stops here.
    NoGrad {
        layer: usize,
    },
    Conv {
        layer: usize,
        input: Tensor<T>,
    },
    Relu {
        layer: usize,
        output: Tensor<T>,
    },
    MaxPool {
        layer: usize,
        indices: PoolIndices,
    },
    Flatten {
        layer: usize,
        input_shape: Vec<usize>,
    },
    Dense {
        layer: usize,
        input: Tensor<T>,
    },
    Dropout {
        layer: usize,
        mask: DropoutMask<T>,
    },
    Softmax {
        layer: usize,
        output: Tensor<T>,
    },
}

impl<T: Scalar> TapeOp<T> {
    pub fn layer(&self) -> usize {
        match *self {
            TapeOp::NoGrad { layer }
            | TapeOp::Conv { layer, .. }
            | TapeOp::Relu { layer, .. }
            | TapeOp::MaxPool { layer, .. }
            | TapeOp::Flatten { layer, .. }
            | TapeOp::Dense { layer, .. }
            | TapeOp::Dropout { layer, .. }
            | TapeOp::Softmax { layer, .. } => layer,
        }
    }
}

/// Record of one forward pass, consumed by the graph's backward pass.
/// Single-owner: one tape per training step.
#[derive(Clone, Debug)]
pub struct GradTape<T: Scalar> {
    pub(crate) arch: ArchConfig,
    pub(crate) mode: Mode,
    pub(crate) ops: Vec<TapeOp<T>>,
}

impl<T: Scalar> GradTape<T> {
    pub(crate) fn new(arch: ArchConfig, mode: Mode) -> Self {
        Self { arch, mode, ops: Vec::new() }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[TapeOp<T>] {
        &self.ops
    }

    /// Ops in the order backward visits them: exact reverse of execution.
    pub fn reverse(&self) -> impl Iterator<Item = &TapeOp<T>> {
        self.ops.iter().rev()
    }
}
