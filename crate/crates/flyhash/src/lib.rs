//! Sparse binary word embeddings learned by a fruit-fly-inspired network:
//! winner-take-all Hebbian updates over sparse context-target vectors,
//! followed by top-k bio-hashing. Includes corpus ingestion, training,
//! evaluation harnesses, and binary model persistence.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod model;
pub mod trainer;

pub use error::{Error, Result};
