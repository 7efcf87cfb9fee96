//! Minimal dense neural-network substrate: tensors, layers with analytic
//! gradients, Adam and Muon, a one-sided Jacobi SVD and the `SQZN`
//! checkpoint format.

mod checkpoint;
mod linalg;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{
    read_checkpoint, read_checkpoint_file, write_checkpoint, write_checkpoint_file,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use linalg::{svd, Svd};
pub use network::{
    gelu, gelu_grad, validate_specs, ForwardCache, Gradients, Layer, LayerKind, LayerSpec, Mode,
    Network, Precision, LAYERNORM_EPS,
};
pub use optim::{newton_schulz, AdamConfig, MuonConfig, OptimizerKind, OptimizerState, NS_COEFFS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid forward cache: {0}")]
    Cache(String),
    #[error("optimizer error: {0}")]
    Optimizer(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
