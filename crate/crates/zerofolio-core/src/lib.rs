//! Feature-free algorithm selection over solver portfolios.
//!
//! A problem instance is treated as plain text: its file is line-shuffled with
//! a seeded permutation, truncated to a character budget, and embedded into a
//! fixed-dimensional vector. A weighted k-nearest-neighbor selector over
//! training-fold embeddings and PAR10 runtimes then picks the algorithm with
//! the lowest weighted score. This crate holds the full algorithmic core:
//!
//! - [`serialize`]: seeded line shuffling and budgeted truncation
//! - [`tfidf`]: the deterministic offline embedding backend (hashed character
//!   n-grams with TF-IDF weighting)
//! - [`selector`]: distances, weighted k-NN scoring, multi-seed voting, and
//!   hybrid score fusion
//! - [`forest`]: reference baselines (single best solver, virtual best solver,
//!   a random-forest classifier on hand-crafted features)
//! - [`stats`]: the fold-paired Wilcoxon signed-rank test and gap-closed
//!   arithmetic
//! - [`eval`]: cross-validation orchestration over ASlib-style fold splits
//!
//! Everything here is deterministic: all randomness flows from explicit 64-bit
//! seeds through [`rng::SplitMix64`], so results are bit-identical across
//! runs, platforms, and thread counts.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! only switches float math from `libm` to the standard library. IO, file
//! formats, the remote embedding backend, and the CLI live in the companion
//! `zerofolio` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod embedding;
pub mod eval;
pub mod forest;
pub mod rng;
pub mod scenario;
pub mod selector;
pub mod serialize;
pub mod stats;
pub mod tfidf;

mod math;

pub use embedding::EmbeddingVector;
pub use scenario::{par10, RunRecord, Scenario};
pub use selector::{AlgorithmScores, Metric, SelectorConfig, TrainedSelector, Weighting};
pub use serialize::SerializationConfig;
