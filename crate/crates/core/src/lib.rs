//! Pause-aware transformer language modeling over word-timestamped
//! transcripts.
//!
//! Each word position carries a pause token, the pair of quantized word
//! duration and following pause (300 bins of 10 ms each). The encoder input
//! is the sum of word, position and `concat(duration, pause)` embeddings.
//! The crate covers ingestion, tokenization, a from-scratch encoder with
//! exact gradients, two-stage training, masked-pause RMSE and
//! classification evaluation, and a synthetic corpus generator.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod rng;
pub mod synth;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};
