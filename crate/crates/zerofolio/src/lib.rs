//! Feature-free algorithm selection over solver portfolios: ingestion, IO,
//! embedding backends, and reporting around the `zerofolio-core` algorithms.
//!
//! - [`arff`] / [`aslib`]: scenario-directory and manifest ingestion
//! - [`embed`]: the remote OpenAI-compatible embedding client and backend
//!   configuration (the offline TF-IDF backend lives in `zerofolio-core`)
//! - [`cache`]: the persistent, checksummed embedding cache
//! - [`report`]: evaluation reports in CSV, Markdown, and JSON
//! - [`state`]: persisted selector state for one-off selection
//! - [`run`]: the `embed` / `evaluate` / `ablate` / `select` / `report`
//!   command implementations behind the CLI

#![warn(missing_docs)]

pub mod arff;
pub mod aslib;
pub mod cache;
pub mod embed;
pub mod report;
pub mod run;
pub mod state;

pub use report::{EvaluationReport, ReportFormat};
pub use run::{RunConfig, RunError};
