//! Shared-vocabulary transformer encoder–decoder with tied embeddings,
//! language embeddings and first-step output capture.

mod generate;
pub mod model;
pub mod vocab;

pub use generate::{generate_beam, generate_greedy, normalized_score, sequence_logprob};
pub use model::{
    CrossMemory, Decoded, Encoded, FirstStepOutput, ModelConfig, ModelVars, Seq2Seq, StepScorer, TransformerScorer,
    MODEL_SET,
};
pub use vocab::Vocab;
