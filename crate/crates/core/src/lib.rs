//! Fake-news classification workbench.
//!
//! The crate covers the whole path from raw news CSVs to report tables:
//! corpus loading and splitting, text cleaning, sparse and sequence features,
//! from-scratch classical baselines, toy-scale neural models (LSTM and a
//! transformer encoder with standard or disentangled attention), a two-step
//! opinion-filtering pipeline, and an evaluation harness for in-distribution
//! and cross-dataset runs.

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod preprocess;
pub mod seed;

pub use error::{Error, Result};
