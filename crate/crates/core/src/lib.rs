//! Modified-VGG16 transfer-learning engine for three-class skin-lesion
//! classification: tensor kernels with reverse-mode gradients, the network
//! graph, the image pipeline, Adam training, evaluation metrics and the
//! weight-archive format.

pub mod data;
pub mod error;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod weights;

pub use error::{DataError, MetricsError, NetError, TensorError, TrainError, WeightsError};
pub use net::{ArchConfig, NetworkGraph};
pub use ops::Mode;
pub use tensor::{Scalar, Tensor};
