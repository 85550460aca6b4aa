//! The numeric core shared by both translation models: tensors, layer
//! forward/backward passes, sparse cross-entropy, Adam, and gradient
//! checking.

pub mod adam;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod layers;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gru::{gru_backward, gru_forward, GruCache, GruGrads, GruParams};
pub use init::{glorot_uniform, seeded_rng};
pub use layers::{
    dense_backward, dense_softmax_forward, embedding_backward, embedding_forward, softmax_rows,
    sparse_ce_loss, DenseParams, EmbeddingParams,
};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}
