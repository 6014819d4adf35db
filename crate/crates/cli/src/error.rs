use dermvgg::{DataError, MetricsError, NetError, TensorError, TrainError, WeightsError};
use thiserror::Error;

/// Failure of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 1: bad flags, config file or hyperparameters, and I/O failures.
    #[error("{0}")]
    Config(String),
    /// Exit 2: dataset layout problems and undecodable images.
    #[error(transparent)]
    Data(#[from] DataError),
    /// Exit 3: training aborted on a non-finite loss or activation.
    #[error("numeric abort: {0}")]
    Numeric(String),
    /// Exit 4: the weight archive does not fit the graph or dataset.
    #[error("archive mismatch: {0}")]
    Archive(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Data(_) => 2,
            Self::Numeric(_) => 3,
            Self::Archive(_) => 4,
        }
    }
}

fn is_non_finite(e: &NetError) -> bool {
    matches!(e, NetError::Layer { source: TensorError::NonFinite(_), .. } | NetError::Tensor(TensorError::NonFinite(_)))
}

impl From<WeightsError> for CliError {
    fn from(e: WeightsError) -> Self {
        match e {
            WeightsError::Io { .. } => Self::Config(e.to_string()),
            other => Self::Archive(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(d) => Self::Data(d),
            TrainError::NonFiniteLoss { .. } | TrainError::Tensor(TensorError::NonFinite(_)) => {
                Self::Numeric(e.to_string())
            }
            TrainError::Net(ref n) if is_non_finite(n) => Self::Numeric(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        if is_non_finite(&e) {
            Self::Numeric(e.to_string())
        } else {
            Self::Config(e.to_string())
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::Config(e.to_string())
    }
}
