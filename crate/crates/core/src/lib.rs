//! Character-to-sentence mnemonic generation for passwords.
//!
//! A bidirectional GRU reads the password characters; an attentive GRU
//! decoder with a maxout readout emits a word sequence whose first letters
//! spell the password. Training is teacher-forced maximum likelihood, and
//! decoding uses beam search. An unsmoothed bigram language model with
//! the same first-letter constraint serves as a baseline.

pub mod beam;
pub mod bigram;
pub mod checkpoint;
pub mod corpus;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use model::{Dims, ModelParams};
