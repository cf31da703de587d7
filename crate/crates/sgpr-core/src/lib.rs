//! Sparse-representation and dictionary-learning toolkit for synthetic
//! ground-penetrating-radar data.
//!
//! The pipeline runs signal synthesis → preprocessing → sparse coding →
//! dictionary learning → statistical parameter evaluation → target
//! classification, all deterministic under explicit seeds.

pub mod classify;
pub mod dictionary_learning;
pub mod error;
pub mod evaluation;
pub mod io;
mod linalg;
pub mod parallel;
pub mod preprocess;
mod rng;
pub mod signal_model;
pub mod sparse_coding;

pub use error::{Error, Result};
