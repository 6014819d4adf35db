//! The VGG16 convolutional base with the replacement classification head.

mod arch;
mod exec;
mod graph;
mod tape;

pub use arch::{ArchConfig, LayerKind, LayerSpec, BLOCK_DEPTHS};
pub use exec::Gradients;
pub use graph::{build_modified_vgg16, LayerParams, NetworkGraph};
pub use tape::{GradTape, TapeOp};
