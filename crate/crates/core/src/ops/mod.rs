//! Forward and backward kernels for every layer type in the network.

mod activation;
mod conv;
mod dense;
mod dropout;
mod loss;
mod pool;

pub use activation::{relu_backward, relu_forward, softmax, softmax_backward};
pub use conv::{conv2d_backward, conv2d_forward, conv2d_input_free_backward, ConvGrads, ConvParams};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
pub use dropout::{dropout, dropout_backward, DropoutMask, Mode};
pub use loss::{cross_entropy, cross_entropy_backward, softmax_cross_entropy_grad, PROB_FLOOR};
pub use pool::{maxpool2x2_backward, maxpool2x2_forward, PoolIndices};
