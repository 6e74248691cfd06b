use crate::log::TrainLog;

#[derive(Debug, thiserror::Error)]
pub enum MetaError {
    #[error("invalid meta configuration: {0}")]
    Config(String),
    /// A loss or gradient became NaN or infinite.
    #[error("non-finite value during {stage}: {detail}")]
    NonFinite { stage: &'static str, detail: String },
    /// Training loss exceeded the divergence guard; carries the log so far.
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64, log: Box<TrainLog> },
    #[error(transparent)]
    Net(#[from] threedpm_nnet::NnetError),
    #[error(transparent)]
    Data(#[from] threedpm::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetaError>;
